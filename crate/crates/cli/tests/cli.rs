//! End-to-end command tests: config handling, CSV schemas, exit codes,
//! and the determinism contract, exercised through both the library entry
//! points and the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::option;
use proptest::prelude::*;
use tempfile::TempDir;

use oes_cli::{cmd_check_theorem2, cmd_train, cmd_variance, CliError, ExperimentConfig};
use oes_core::{EstimatorKind, LinearLossSpec, OptimizerKind};

fn oes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn lorenz_config(out: &Path) -> String {
    format!(
        "graph = lorenz\n\
         horizon = 200\n\
         estimator = nres\n\
         workers = 4\n\
         window = 100\n\
         sigma = 0.04\n\
         optimizer = sgd\n\
         learning_rate = 1e-5\n\
         num_updates = 10\n\
         eval_every = 5\n\
         test_samples = 4\n\
         theta_every = 2\n\
         master_seed = 17\n\
         out = {}\n",
        out.display()
    )
}

/// Drops the wall-clock column (and comment lines) so runs can be
/// compared on everything the determinism contract covers.
fn rows_without_wall_ms(csv: &str) -> Vec<String> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            let mut kept: Vec<&str> = Vec::with_capacity(cells.len());
            for (i, c) in cells.iter().enumerate() {
                if i != 5 {
                    kept.push(c);
                }
            }
            kept.join(",")
        })
        .collect()
}

#[test]
fn same_seed_gives_byte_identical_csv_except_wall_clock() {
    let dir = TempDir::new().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let config = write_file(&dir, "run.cfg", &lorenz_config(&out_a));

    cmd_train(&config, None, None).unwrap();
    cmd_train(&config, None, Some(out_b.display().to_string())).unwrap();
    let a = std::fs::read_to_string(&out_a).unwrap();
    let b = std::fs::read_to_string(&out_b).unwrap();
    assert_eq!(rows_without_wall_ms(&a), rows_without_wall_ms(&b));

    let out_c = dir.path().join("c.csv");
    cmd_train(&config, Some(18), Some(out_c.display().to_string())).unwrap();
    let c = std::fs::read_to_string(&out_c).unwrap();
    assert_ne!(
        rows_without_wall_ms(&a),
        rows_without_wall_ms(&c),
        "a different seed must change the run"
    );
}

#[test]
fn zero_updates_writes_a_header_only_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("empty.csv");
    let text = lorenz_config(&out).replace("num_updates = 10", "num_updates = 0");
    let config = write_file(&dir, "run.cfg", &text);

    cmd_train(&config, None, None).unwrap();
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], oes_cli::TRAIN_SCHEMA);
    assert!(lines.last().unwrap().starts_with("update,train_loss"));
    assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 1);
}

#[test]
fn invalid_window_fails_validation_without_creating_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never.csv");
    let text = lorenz_config(&out).replace("window = 100", "window = 30");
    let config = write_file(&dir, "run.cfg", &text);

    let output = oes(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("not divisible"), "stderr: {stderr}");
    assert!(!out.exists(), "no output file may be created");
}

#[test]
fn validation_reports_every_violation_at_once() {
    let dir = TempDir::new().unwrap();
    // Four problems: zero sigma, bad window, missing num_updates, missing
    // master_seed (no --seed given).
    let text = "graph = lorenz\n\
                horizon = 200\n\
                estimator = nres\n\
                workers = 4\n\
                window = 30\n\
                sigma = 0\n\
                optimizer = sgd\n\
                learning_rate = 1e-5\n\
                out = x.csv\n";
    let config = write_file(&dir, "run.cfg", text);
    let output = oes(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    for needle in ["sigma", "not divisible", "num_updates", "master_seed"] {
        assert!(stderr.contains(needle), "missing `{needle}` in: {stderr}");
    }
}

#[test]
fn divergent_start_point_exits_with_code_3() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("div.csv");
    let text = format!("{}theta_init = 40,40\n", lorenz_config(&out));
    let config = write_file(&dir, "run.cfg", &text);

    let output = oes(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("diverged"), "stderr: {stderr}");
    assert!(!out.exists());
}

#[test]
fn sweep_rejects_duplicate_periods_via_the_binary() {
    let dir = TempDir::new().unwrap();
    let spec_path = dir.path().join("spec.txt");
    let spec: LinearLossSpec<f64> = LinearLossSpec::random(8, 2, 3);
    std::fs::write(&spec_path, spec.to_text()).unwrap();
    let out = dir.path().join("sweep.csv");
    let text = format!(
        "graph = linear\n\
         linear_spec = {}\n\
         estimator = gpes\n\
         workers = 2\n\
         window = 2\n\
         k_list = 2,4,4\n\
         sigma = 0.1\n\
         theta_init = 0,0\n\
         optimizer = sgd\n\
         learning_rate = 0.01\n\
         num_updates = 2\n\
         master_seed = 5\n\
         out = {}\n",
        spec_path.display(),
        out.display()
    );
    let config = write_file(&dir, "run.cfg", &text);
    let output = oes(&["sweep-k", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("duplicate period 4"));
    assert!(!out.exists());
}

#[test]
fn variance_closed_form_fills_only_on_linear_graphs() {
    let dir = TempDir::new().unwrap();
    let spec_path = dir.path().join("spec.txt");
    let spec: LinearLossSpec<f64> = LinearLossSpec::random(4, 2, 9);
    std::fs::write(&spec_path, spec.to_text()).unwrap();

    let linear_out = dir.path().join("linear.csv");
    let linear_cfg = write_file(
        &dir,
        "linear.cfg",
        &format!(
            "graph = linear\n\
             linear_spec = {}\n\
             estimator = gpes\n\
             workers = 1\n\
             window = 1\n\
             k_list = 1,4\n\
             sigma = 0.1\n\
             theta_init = 0,0\n\
             mc_samples = 200\n\
             master_seed = 2\n\
             out = {}\n",
            spec_path.display(),
            linear_out.display()
        ),
    );
    cmd_variance(&linear_cfg, None, None, None).unwrap();
    let csv = std::fs::read_to_string(&linear_out).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let closed_form = row.split(',').nth(5).unwrap();
        assert!(
            !closed_form.is_empty(),
            "closed_form must be filled on a unit-window linear run: {row}"
        );
    }

    let lorenz_out = dir.path().join("lorenz.csv");
    let lorenz_cfg = write_file(
        &dir,
        "lorenz.cfg",
        &format!(
            "graph = lorenz\n\
             horizon = 8\n\
             estimator = nres\n\
             workers = 1\n\
             window = 2\n\
             sigma = 0.04\n\
             mc_samples = 100\n\
             master_seed = 2\n\
             out = {}\n",
            lorenz_out.display()
        ),
    );
    cmd_variance(&lorenz_cfg, None, None, None).unwrap();
    let csv = std::fs::read_to_string(&lorenz_out).unwrap();
    let row = csv.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    assert_eq!(
        row.split(',').nth(5).unwrap(),
        "",
        "no closed form exists for the chaotic graph: {row}"
    );
}

#[test]
fn variance_rejects_too_few_samples() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("var.csv");
    let cfg = write_file(
        &dir,
        "run.cfg",
        &format!(
            "graph = lorenz\n\
             horizon = 8\n\
             estimator = nres\n\
             workers = 1\n\
             window = 2\n\
             sigma = 0.04\n\
             mc_samples = 50\n\
             master_seed = 2\n\
             out = {}\n",
            out.display()
        ),
    );
    match cmd_variance(&cfg, None, None, None) {
        Err(CliError::Config(errors)) => {
            assert!(errors.iter().any(|e| e.contains("mc_samples")), "{errors:?}")
        }
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(!out.exists());
}

fn spec_text_from_rows(rows: Vec<Vec<Vec<f64>>>) -> String {
    LinearLossSpec::from_rows(rows).unwrap().to_text()
}

#[test]
fn condition_checker_reports_both_outcomes_and_zero_variances() {
    let dir = TempDir::new().unwrap();

    // Every per-step total is u = (1,0): window sums are equal for any W.
    let equal = write_file(
        &dir,
        "equal.txt",
        &spec_text_from_rows(
            (1..=4)
                .map(|t| {
                    let mut rows = vec![vec![0.0, 0.0]; t];
                    rows[0] = vec![1.0, 0.0];
                    rows
                })
                .collect(),
        ),
    );
    let report = cmd_check_theorem2(&equal, 2, None, None).unwrap();
    assert_eq!(report, "lhs=8 rhs=12 holds=true");

    // Orthogonal equal-norm step totals: lhs 2, rhs 3/2.
    let ortho = write_file(
        &dir,
        "ortho.txt",
        &spec_text_from_rows(vec![
            vec![vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![0.0, 0.0]],
        ]),
    );
    let report = cmd_check_theorem2(&ortho, 1, None, None).unwrap();
    assert_eq!(report, "lhs=2 rhs=1.5 holds=false");

    // All-zero spec: condition holds at 0 <= 0 and both paired Monte-Carlo
    // variances are exactly zero.
    let zero = write_file(
        &dir,
        "zero.txt",
        &spec_text_from_rows(vec![vec![vec![0.0]], vec![vec![0.0], vec![0.0]]]),
    );
    let report = cmd_check_theorem2(&zero, 1, Some(200), Some(4)).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "lhs=0 rhs=0 holds=true");
    let mc = lines.next().unwrap();
    assert!(mc.contains("mc_avg_nres=0 "), "{mc}");
    assert!(mc.contains("mc_fulles=0 "), "{mc}");
}

#[test]
fn condition_checker_reports_spec_parse_errors_with_line_numbers() {
    let dir = TempDir::new().unwrap();
    let bad = write_file(&dir, "bad.txt", "2 1\n1 1 0.5\n2 9 0.5\n2 2 0.5\n");
    let output = oes(&["check-theorem2", bad.to_str().unwrap(), "--window", "1"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");

    let missing_seed = oes(&[
        "check-theorem2",
        bad.to_str().unwrap(),
        "--window",
        "1",
        "--mc",
        "200",
    ]);
    assert_eq!(missing_seed.status.code(), Some(2));
}

#[test]
fn generated_specs_are_seed_deterministic_and_parseable() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for path in [&a, &b] {
        let output = oes(&[
            "gen-linear-spec",
            "--horizon",
            "6",
            "--dim",
            "2",
            "--seed",
            "42",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    let text_a = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text_a, std::fs::read_to_string(&b).unwrap());
    let spec: LinearLossSpec<f64> = LinearLossSpec::from_text(&text_a).unwrap();
    assert_eq!(spec.horizon(), 6);
    assert_eq!(spec.param_dim(), 2);
}

fn estimator_kind() -> impl Strategy<Value = EstimatorKind> {
    prop_oneof![
        Just(EstimatorKind::FullEs),
        Just(EstimatorKind::Tes),
        Just(EstimatorKind::Pes),
        Just(EstimatorKind::Gpes),
        Just(EstimatorKind::Nres),
    ]
}

fn graph_kind() -> impl Strategy<Value = oes_cli::GraphKind> {
    prop_oneof![Just(oes_cli::GraphKind::Lorenz), Just(oes_cli::GraphKind::Linear)]
}

fn optimizer_kind() -> impl Strategy<Value = OptimizerKind> {
    prop_oneof![Just(OptimizerKind::Sgd), Just(OptimizerKind::Adam)]
}

fn config_strategy() -> impl Strategy<Value = ExperimentConfig> {
    let path = "[a-z0-9_./-]{1,16}";
    let head = (
        option::of(graph_kind()),
        option::of(path),
        option::of(0usize..10_000),
        option::of(estimator_kind()),
        option::of(0usize..1000),
        option::of(0usize..1000),
        option::of(0usize..1000),
    );
    let mid = (
        option::of(-1e6f64..1e6),
        option::of(optimizer_kind()),
        option::of(-10.0f64..10.0),
        option::of(prop::collection::vec((0u64..100_000, -10.0f64..10.0), 1..4)),
        option::of(0u64..100_000),
        option::of(0u64..1000),
        option::of(0usize..1000),
        option::of(0u64..1000),
    );
    let tail = (
        option::of(prop::collection::vec(-1e6f64..1e6, 1..4)),
        option::of(any::<u64>()),
        option::of(path),
        option::of(prop::collection::vec(0usize..10_000, 1..5)),
        option::of(0usize..1_000_000),
    );
    (head, mid, tail).prop_map(
        |(
            (graph, linear_spec, horizon, estimator, workers, window, noise_period),
            (sigma, optimizer, learning_rate, lr_schedule, num_updates, eval_every, test_samples, theta_every),
            (theta_init, master_seed, out, k_list, mc_samples),
        )| ExperimentConfig {
            graph,
            linear_spec,
            horizon,
            estimator,
            workers,
            window,
            noise_period,
            sigma,
            optimizer,
            learning_rate,
            lr_schedule,
            num_updates,
            eval_every,
            test_samples,
            theta_every,
            theta_init,
            master_seed,
            out,
            k_list,
            mc_samples,
        },
    )
}

proptest! {
    /// parse(to_text(c)) == c for arbitrary configs: the canonical
    /// serialization loses nothing, including float values.
    #[test]
    fn config_round_trips_through_text(config in config_strategy()) {
        let text = config.to_text();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(parsed, config);
    }
}
