//! The five subcommand implementations. Each validates fully (collecting
//! every violation) before touching the output path, runs the experiment,
//! and writes its CSV in one shot, so a failed invocation never leaves a
//! partial file behind.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::anyhow;

use oes_core::{
    closed_form_fulles_variance, closed_form_gpes_variance, episode_mean_loss, lorenz_test_loss,
    make_step_unlocked_pool, mc_total_variance, train, window_sum_condition, EstimatorConfig,
    EstimatorKind, LinearGraph, LinearLossSpec, LrSchedule, Optimizer, ParamVector, TrainLog,
    TrainOptions, UnrolledGraph, VarianceError, VarianceReport, MIN_MC_SAMPLES,
};

use crate::config::{CommandKind, ExperimentConfig, GraphHandle, DEFAULT_TEST_SAMPLES};
use crate::error::CliError;

/// Schema tags; the first line of every CSV names the layout it follows.
pub const TRAIN_SCHEMA: &str = "# schema: train-v1";
pub const SWEEP_SCHEMA: &str = "# schema: sweep-k-v1";
pub const VARIANCE_SCHEMA: &str = "# schema: variance-v1";

/// Validates the config for `cmd` and builds the graph, reporting every
/// violation at once.
fn resolve(config: &ExperimentConfig, cmd: CommandKind) -> Result<GraphHandle, CliError> {
    let mut errors = config.validate(cmd);
    match config.load_graph() {
        Ok(graph) => {
            errors.extend(config.cross_validate(cmd, graph.horizon(), graph.param_dim()));
            if errors.is_empty() {
                Ok(graph)
            } else {
                Err(CliError::Config(errors))
            }
        }
        Err(more) => {
            errors.extend(more);
            Err(CliError::Config(errors))
        }
    }
}

/// Whether an estimator error is a numerical blow-up (exit 3) rather
/// than a usage problem.
fn is_divergence(e: &oes_core::EstimatorError) -> bool {
    match e {
        oes_core::EstimatorError::Diverged { .. } => true,
        oes_core::EstimatorError::Worker { source, .. } => is_divergence(source),
        _ => false,
    }
}

fn initial_params(config: &ExperimentConfig) -> Result<ParamVector<f64>, CliError> {
    ParamVector::new(config.initial_theta())
        .map_err(|e| CliError::config(format!("theta_init: {e}")))
}

fn build_optimizer(config: &ExperimentConfig, param_dim: usize) -> Result<Optimizer<f64>, CliError> {
    let schedule: LrSchedule<f64> = config.schedule()?;
    Ok(Optimizer::new(
        config.optimizer.expect("validated"),
        schedule,
        param_dim,
    ))
}

/// One full training run at the config's settings; `noise_period`
/// overrides the config key so the sweep can reuse this path.
fn run_training(
    config: &ExperimentConfig,
    graph: &GraphHandle,
    noise_period: Option<usize>,
) -> Result<TrainLog<f64>, CliError> {
    let seed = config.master_seed.expect("validated");
    let est = config.estimator_config(graph.horizon(), noise_period);
    let theta_init = initial_params(config)?;
    let mut pool = make_step_unlocked_pool(&est, config.workers.expect("validated"), graph, &theta_init, seed)
        .map_err(|e| {
            if is_divergence(&e) {
                CliError::Divergence(format!("during warmup: {e}"))
            } else {
                CliError::Other(anyhow!("worker pool construction: {e}"))
            }
        })?;
    let mut optimizer = build_optimizer(config, graph.param_dim())?;
    let options = TrainOptions {
        num_updates: config.num_updates.expect("validated"),
        eval_every: config.eval_every,
        theta_every: config.theta_every,
    };
    let test_samples = config.test_samples.unwrap_or(DEFAULT_TEST_SAMPLES);

    train(graph, &mut pool, &mut optimizer, &theta_init, &options, |theta| match graph {
        GraphHandle::Lorenz(g) => lorenz_test_loss(g, theta, test_samples, seed),
        GraphHandle::Linear(g) => episode_mean_loss(g, theta),
    })
    .map_err(|e| CliError::Divergence(e.to_string()))
}

fn push_cell(row: &mut String, value: Option<f64>) {
    row.push(',');
    if let Some(v) = value {
        let _ = write!(row, "{v}");
    }
}

fn record_cells(row: &mut String, record: &oes_core::TrainRecord<f64>, theta_dim: Option<usize>) {
    let _ = write!(row, "{},{}", record.update, record.train_loss);
    push_cell(row, record.test_loss);
    let _ = write!(
        row,
        ",{},{},{}",
        record.cum_unroll_steps, record.cum_sequential_steps, record.wall_ms
    );
    if let Some(d) = theta_dim {
        match &record.theta {
            Some(theta) => {
                for v in theta {
                    let _ = write!(row, ",{v}");
                }
            }
            None => {
                for _ in 0..d {
                    row.push(',');
                }
            }
        }
    }
}

fn theta_header(out: &mut String, theta_dim: Option<usize>) {
    if let Some(d) = theta_dim {
        for i in 0..d {
            let _ = write!(out, ",theta_{i}");
        }
    }
}

fn train_csv(log: &TrainLog<f64>, theta_dim: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TRAIN_SCHEMA}");
    let _ = writeln!(out, "# warmup_unroll_steps = {}", log.warmup_unroll_steps);
    let _ = writeln!(out, "# warmup_sequential_steps = {}", log.warmup_sequential_steps);
    out.push_str("update,train_loss,test_loss,cum_unroll_steps,cum_sequential_steps,wall_ms");
    theta_header(&mut out, theta_dim);
    out.push('\n');
    for record in &log.records {
        let mut row = String::new();
        record_cells(&mut row, record, theta_dim);
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn write_output(config: &ExperimentConfig, text: &str) -> Result<(), CliError> {
    let path = config.out.as_deref().expect("validated");
    std::fs::write(path, text).map_err(|e| CliError::Other(anyhow!("writing {path}: {e}")))?;
    Ok(())
}

fn theta_dim_for(config: &ExperimentConfig, graph: &GraphHandle) -> Option<usize> {
    config.theta_every.map(|_| graph.param_dim())
}

/// `train`: one seeded run, per-update CSV.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: Option<String>) -> Result<(), CliError> {
    let config = ExperimentConfig::from_file(config_path)?.with_overrides(seed, out);
    let graph = resolve(&config, CommandKind::Train)?;
    let log = run_training(&config, &graph, None)?;
    write_output(&config, &train_csv(&log, theta_dim_for(&config, &graph)))
}

/// `sweep-k`: one training run per noise-sharing period, shared base
/// seed, long-format CSV keyed by the `k` column.
pub fn cmd_sweep_k(config_path: &Path, seed: Option<u64>, out: Option<String>) -> Result<(), CliError> {
    let config = ExperimentConfig::from_file(config_path)?.with_overrides(seed, out);
    let graph = resolve(&config, CommandKind::SweepK)?;
    let theta_dim = theta_dim_for(&config, &graph);

    let mut out_text = String::new();
    let _ = writeln!(out_text, "{SWEEP_SCHEMA}");
    out_text.push_str("k,update,train_loss,test_loss,cum_unroll_steps,cum_sequential_steps,wall_ms");
    theta_header(&mut out_text, theta_dim);
    out_text.push('\n');

    for &k in config.k_list.as_deref().expect("validated") {
        let log = run_training(&config, &graph, Some(k))
            .map_err(|e| match e {
                CliError::Divergence(msg) => CliError::Divergence(format!("k={k}: {msg}")),
                other => other,
            })?;
        for record in &log.records {
            let mut row = format!("{k},");
            record_cells(&mut row, record, theta_dim);
            out_text.push_str(&row);
            out_text.push('\n');
        }
    }
    write_output(&config, &out_text)
}

/// The closed-form total variance matching one estimator row, when one
/// exists: linear graph, single worker, and either the full-episode
/// stateless estimator or a unit-window online one.
fn closed_form_for(
    est: &EstimatorConfig<f64>,
    spec: Option<&LinearLossSpec<f64>>,
    workers: usize,
    horizon: usize,
) -> Option<f64> {
    let spec = spec?;
    if workers != 1 {
        return None;
    }
    match est.kind {
        EstimatorKind::FullEs => Some(closed_form_fulles_variance(spec)),
        EstimatorKind::Tes => None,
        _ if est.window == 1 => {
            let period = match est.kind {
                EstimatorKind::Gpes => est.noise_period?,
                EstimatorKind::Pes => 1,
                EstimatorKind::Nres => horizon,
                _ => unreachable!(),
            };
            Some(closed_form_gpes_variance(spec, period))
        }
        _ => None,
    }
}

fn variance_row(report: &VarianceReport<f64>, horizon: usize) -> String {
    let mut row = String::new();
    let _ = write!(row, "{}", report.kind);
    row.push(',');
    if report.kind != EstimatorKind::FullEs {
        let _ = write!(row, "{}", report.window);
    }
    row.push(',');
    if let Some(k) = report.noise_period {
        let _ = write!(row, "{k}");
    } else if report.kind == EstimatorKind::Nres {
        let _ = write!(row, "{horizon}");
    }
    let _ = write!(row, ",{},{}", report.workers, report.samples);
    push_cell(&mut row, report.closed_form);
    let _ = write!(row, ",{},{}", report.mc_total_variance, report.stderr);
    row
}

/// `variance`: Monte-Carlo total variance at the frozen initial θ, one
/// row per noise-sharing period (or a single row for non-sweeping
/// estimators), with the closed form alongside when it exists.
pub fn cmd_variance(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<String>,
    mc: Option<usize>,
) -> Result<(), CliError> {
    let mut config = ExperimentConfig::from_file(config_path)?.with_overrides(seed, out);
    if mc.is_some() {
        config.mc_samples = mc;
    }
    let graph = resolve(&config, CommandKind::Variance)?;
    let horizon = graph.horizon();
    let theta = initial_params(&config)?;
    let workers = config.workers.expect("validated");
    let samples = config.mc_samples.expect("validated");
    let master_seed = config.master_seed.expect("validated");

    let periods: Vec<Option<usize>> =
        if config.estimator == Some(EstimatorKind::Gpes) && config.k_list.is_some() {
            config.k_list.as_deref().unwrap().iter().map(|&k| Some(k)).collect()
        } else {
            vec![config.noise_period]
        };

    let mut out_text = String::new();
    let _ = writeln!(out_text, "{VARIANCE_SCHEMA}");
    out_text.push_str("estimator,W,K,N,M,closed_form,mc,stderr\n");
    for period in periods {
        let est = config.estimator_config(horizon, period);
        let mut report = mc_total_variance(&est, workers, &graph, &theta, samples, master_seed)
            .map_err(|e| match e {
                VarianceError::TooFewSamples { .. } => CliError::config(e.to_string()),
                VarianceError::Sample { .. } => CliError::Divergence(e.to_string()),
            })?;
        report.closed_form = closed_form_for(&est, graph.spec(), workers, horizon);
        let _ = writeln!(out_text, "{}", variance_row(&report, horizon));
    }
    write_output(&config, &out_text)
}

/// `check-theorem2`: evaluates the window-sum condition on a spec file
/// and, with `--mc`, measures the paired variances it predicts an order
/// for: the mean of T/W single-episode-noise workers vs one full-episode
/// estimate. Returns the report text; the caller prints it.
pub fn cmd_check_theorem2(
    spec_path: &Path,
    window: usize,
    mc: Option<usize>,
    seed: Option<u64>,
) -> Result<String, CliError> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| CliError::config(format!("{}: {e}", spec_path.display())))?;
    let spec: LinearLossSpec<f64> = LinearLossSpec::from_text(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", spec_path.display())))?;
    let condition = window_sum_condition(&spec, window)
        .map_err(|e| CliError::config(format!("window: {e}")))?;

    let mut out = format!(
        "lhs={} rhs={} holds={}",
        condition.lhs, condition.rhs, condition.holds
    );

    if let Some(samples) = mc {
        let seed = seed.ok_or_else(|| CliError::config("--seed: required with --mc"))?;
        if samples < MIN_MC_SAMPLES {
            return Err(CliError::config(format!(
                "--mc: need at least {MIN_MC_SAMPLES} samples, got {samples}"
            )));
        }
        let horizon = spec.horizon();
        let theta = ParamVector::zeros(spec.param_dim());
        let graph = LinearGraph::new(spec);
        // Linear losses make every estimate independent of both θ and σ,
        // so σ is pinned; sharing master_seed pairs the two measurements
        // on identical noise streams.
        let nres = EstimatorConfig {
            kind: EstimatorKind::Nres,
            sigma: 1.0,
            window,
            noise_period: None,
        };
        let fulles = EstimatorConfig {
            kind: EstimatorKind::FullEs,
            sigma: 1.0,
            window: horizon,
            noise_period: None,
        };
        let divergence = |e: VarianceError| match e {
            VarianceError::TooFewSamples { .. } => CliError::config(e.to_string()),
            VarianceError::Sample { .. } => CliError::Divergence(e.to_string()),
        };
        let avg = mc_total_variance(&nres, horizon / window, &graph, &theta, samples, seed)
            .map_err(divergence)?;
        let single = mc_total_variance(&fulles, 1, &graph, &theta, samples, seed)
            .map_err(divergence)?;
        let _ = write!(
            out,
            "\nmc_avg_nres={} mc_fulles={} se_avg_nres={} se_fulles={}",
            avg.mc_total_variance, single.mc_total_variance, avg.stderr, single.stderr
        );
    }
    Ok(out)
}

/// `gen-linear-spec`: writes a seeded random loss specification file.
pub fn cmd_gen_linear_spec(
    horizon: usize,
    dim: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let mut errors = Vec::new();
    if horizon < 1 {
        errors.push("--horizon: must be at least 1".to_string());
    }
    if dim < 1 {
        errors.push("--dim: must be at least 1".to_string());
    }
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let spec: LinearLossSpec<f64> = LinearLossSpec::random(horizon, dim, seed);
    std::fs::write(out, spec.to_text())
        .map_err(|e| CliError::Other(anyhow!("writing {}: {e}", out.display())))?;
    Ok(())
}
