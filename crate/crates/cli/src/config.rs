//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines ignored. Parsing
//! collects every problem (unknown keys, duplicates, malformed values)
//! with its line number instead of stopping at the first; validation does
//! the same for semantic constraints, so one failed invocation shows the
//! full repair list. `to_text` writes a canonical form whose re-parse is
//! identical to the original config.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use oes_core::{
    EstimatorConfig, EstimatorKind, LinearGraph, LinearLossSpec, LorenzGraph, LrSchedule,
    OptimizerKind, UnrolledGraph, MIN_MC_SAMPLES,
};

use crate::error::CliError;

/// Which system the experiment unrolls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Lorenz,
    Linear,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Lorenz => "lorenz",
            GraphKind::Linear => "linear",
        })
    }
}

impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lorenz" => Ok(GraphKind::Lorenz),
            "linear" => Ok(GraphKind::Linear),
            other => Err(format!("unknown graph `{other}` (expected lorenz or linear)")),
        }
    }
}

/// Which subcommand the config is being validated for; the required-key
/// sets differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Train,
    SweepK,
    Variance,
}

/// Parsed configuration. Every key is optional at parse time; per-command
/// validation decides what is required. `None` always means "not set".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub graph: Option<GraphKind>,
    /// Path to a linear loss specification file (graph = linear).
    pub linear_spec: Option<String>,
    /// Horizon T; required for lorenz, cross-checked for linear.
    pub horizon: Option<usize>,
    pub estimator: Option<EstimatorKind>,
    pub workers: Option<usize>,
    pub window: Option<usize>,
    pub noise_period: Option<usize>,
    pub sigma: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub learning_rate: Option<f64>,
    /// Piecewise-constant schedule as (first update index, rate) pairs.
    pub lr_schedule: Option<Vec<(u64, f64)>>,
    pub num_updates: Option<u64>,
    pub eval_every: Option<u64>,
    pub test_samples: Option<usize>,
    pub theta_every: Option<u64>,
    pub theta_init: Option<Vec<f64>>,
    pub master_seed: Option<u64>,
    pub out: Option<String>,
    pub k_list: Option<Vec<usize>>,
    pub mc_samples: Option<usize>,
}

/// Test-loss sample count used when the key is absent.
pub const DEFAULT_TEST_SAMPLES: usize = 32;

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse()
        .map_err(|_| format!("expected an unsigned integer, got `{s}`"))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse()
        .map_err(|_| format!("expected an unsigned integer, got `{s}`"))
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("expected a number, got `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("expected a finite number, got `{s}`"));
    }
    Ok(v)
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|part| parse_f64(part.trim())).collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',').map(|part| parse_usize(part.trim())).collect()
}

/// `start:rate` pairs separated by commas, e.g. `0:1e-5,1000:1e-6`.
fn parse_schedule(s: &str) -> Result<Vec<(u64, f64)>, String> {
    s.split(',')
        .map(|part| {
            let part = part.trim();
            let (start, rate) = part
                .split_once(':')
                .ok_or_else(|| format!("expected `update:rate`, got `{part}`"))?;
            Ok((parse_u64(start.trim())?, parse_f64(rate.trim())?))
        })
        .collect()
}

fn require(errors: &mut Vec<String>, name: &str, present: bool) {
    if !present {
        errors.push(format!("{name}: required"));
    }
}

fn put<T>(errors: &mut Vec<String>, line: usize, key: &str, slot: &mut Option<T>, value: Result<T, String>) {
    if slot.is_some() {
        errors.push(format!("line {line}: duplicate key `{key}`"));
        return;
    }
    match value {
        Ok(v) => *slot = Some(v),
        Err(msg) => errors.push(format!("line {line}: {key}: {msg}")),
    }
}

impl ExperimentConfig {
    /// Parses config text, reporting every malformed line at once.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = ExperimentConfig::default();
        let mut errors = Vec::new();

        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                errors.push(format!("line {line}: expected `key = value`, got `{content}`"));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                errors.push(format!("line {line}: {key}: empty value"));
                continue;
            }
            match key {
                "graph" => put(&mut errors, line, key, &mut c.graph, value.parse()),
                "linear_spec" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.linear_spec,
                    Ok(value.to_string()),
                ),
                "horizon" => put(&mut errors, line, key, &mut c.horizon, parse_usize(value)),
                "estimator" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.estimator,
                    value.parse().map_err(|e| format!("{e}")),
                ),
                "workers" => put(&mut errors, line, key, &mut c.workers, parse_usize(value)),
                "window" => put(&mut errors, line, key, &mut c.window, parse_usize(value)),
                "noise_period" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.noise_period,
                    parse_usize(value),
                ),
                "sigma" => put(&mut errors, line, key, &mut c.sigma, parse_f64(value)),
                "optimizer" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.optimizer,
                    value.parse().map_err(|e| format!("{e}")),
                ),
                "learning_rate" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.learning_rate,
                    parse_f64(value),
                ),
                "lr_schedule" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.lr_schedule,
                    parse_schedule(value),
                ),
                "num_updates" => put(&mut errors, line, key, &mut c.num_updates, parse_u64(value)),
                "eval_every" => put(&mut errors, line, key, &mut c.eval_every, parse_u64(value)),
                "test_samples" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.test_samples,
                    parse_usize(value),
                ),
                "theta_every" => put(&mut errors, line, key, &mut c.theta_every, parse_u64(value)),
                "theta_init" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.theta_init,
                    parse_f64_list(value),
                ),
                "master_seed" => put(&mut errors, line, key, &mut c.master_seed, parse_u64(value)),
                "out" => put(&mut errors, line, key, &mut c.out, Ok(value.to_string())),
                "k_list" => put(&mut errors, line, key, &mut c.k_list, parse_usize_list(value)),
                "mc_samples" => put(
                    &mut errors,
                    line,
                    key,
                    &mut c.mc_samples,
                    parse_usize(value),
                ),
                other => errors.push(format!("line {line}: unknown key `{other}`")),
            }
        }

        if errors.is_empty() {
            Ok(c)
        } else {
            Err(CliError::Config(errors))
        }
    }

    /// Reads and parses a config file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical serialization; `parse(to_text(c)) == c` for any parsed c.
    pub fn to_text(&self) -> String {
        use fmt::Write as _;
        let mut out = String::new();
        let mut line = |s: String| {
            let _ = writeln!(out, "{s}");
        };
        if let Some(v) = self.graph {
            line(format!("graph = {v}"));
        }
        if let Some(v) = &self.linear_spec {
            line(format!("linear_spec = {v}"));
        }
        if let Some(v) = self.horizon {
            line(format!("horizon = {v}"));
        }
        if let Some(v) = self.estimator {
            line(format!("estimator = {v}"));
        }
        if let Some(v) = self.workers {
            line(format!("workers = {v}"));
        }
        if let Some(v) = self.window {
            line(format!("window = {v}"));
        }
        if let Some(v) = self.noise_period {
            line(format!("noise_period = {v}"));
        }
        if let Some(v) = self.sigma {
            line(format!("sigma = {v}"));
        }
        if let Some(v) = self.optimizer {
            line(format!("optimizer = {v}"));
        }
        if let Some(v) = self.learning_rate {
            line(format!("learning_rate = {v}"));
        }
        if let Some(pieces) = &self.lr_schedule {
            let joined: Vec<String> = pieces.iter().map(|(u, r)| format!("{u}:{r}")).collect();
            line(format!("lr_schedule = {}", joined.join(",")));
        }
        if let Some(v) = self.num_updates {
            line(format!("num_updates = {v}"));
        }
        if let Some(v) = self.eval_every {
            line(format!("eval_every = {v}"));
        }
        if let Some(v) = self.test_samples {
            line(format!("test_samples = {v}"));
        }
        if let Some(v) = self.theta_every {
            line(format!("theta_every = {v}"));
        }
        if let Some(values) = &self.theta_init {
            let joined: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
            line(format!("theta_init = {}", joined.join(",")));
        }
        if let Some(v) = self.master_seed {
            line(format!("master_seed = {v}"));
        }
        if let Some(v) = &self.out {
            line(format!("out = {v}"));
        }
        if let Some(ks) = &self.k_list {
            let joined: Vec<String> = ks.iter().map(|k| format!("{k}")).collect();
            line(format!("k_list = {}", joined.join(",")));
        }
        if let Some(v) = self.mc_samples {
            line(format!("mc_samples = {v}"));
        }
        out
    }

    /// Applies command-line overrides; flags win over file keys.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<String>) -> Self {
        if seed.is_some() {
            self.master_seed = seed;
        }
        if out.is_some() {
            self.out = out;
        }
        self
    }

    /// Semantic checks that need no file access. Returns one message per
    /// violated constraint; empty means valid so far.
    pub fn validate(&self, cmd: CommandKind) -> Vec<String> {
        let mut errors = Vec::new();

        require(&mut errors, "graph", self.graph.is_some());
        match self.graph {
            Some(GraphKind::Lorenz) => {
                if self.horizon.is_none() {
                    errors.push("horizon: required for graph = lorenz".into());
                } else if self.horizon == Some(0) {
                    errors.push("horizon: must be at least 1".into());
                }
                if let Some(theta) = &self.theta_init {
                    if theta.len() != 2 {
                        errors.push(format!(
                            "theta_init: lorenz has 2 parameters, got {}",
                            theta.len()
                        ));
                    }
                }
            }
            Some(GraphKind::Linear) => {
                if self.linear_spec.is_none() {
                    errors.push("linear_spec: required for graph = linear".into());
                }
                if self.theta_init.is_none() {
                    errors.push("theta_init: required for graph = linear".into());
                }
            }
            None => {}
        }

        require(&mut errors, "estimator", self.estimator.is_some());
        require(&mut errors, "workers", self.workers.is_some());
        if self.workers == Some(0) {
            errors.push("workers: must be at least 1".into());
        }
        require(&mut errors, "sigma", self.sigma.is_some());
        if let Some(sigma) = self.sigma {
            if !(sigma > 0.0) {
                errors.push(format!("sigma: must be positive, got {sigma}"));
            }
        }

        let estimator = self.estimator;
        if estimator.is_some() && estimator != Some(EstimatorKind::FullEs) {
            if self.window.is_none() {
                errors.push("window: required for online estimators".into());
            } else if self.window == Some(0) {
                errors.push("window: must be at least 1".into());
            }
        }
        if estimator.is_some() && estimator != Some(EstimatorKind::Gpes) {
            if self.noise_period.is_some() {
                errors.push("noise_period: only applies to estimator = gpes".into());
            }
            if self.k_list.is_some() && cmd != CommandKind::Train {
                errors.push("k_list: requires estimator = gpes".into());
            }
        }
        if estimator == Some(EstimatorKind::Gpes) {
            let has_k = match cmd {
                CommandKind::Train => self.noise_period.is_some(),
                CommandKind::SweepK => true,
                CommandKind::Variance => self.noise_period.is_some() || self.k_list.is_some(),
            };
            if !has_k {
                errors.push("noise_period: required for estimator = gpes".into());
            }
        }

        if matches!(cmd, CommandKind::Train | CommandKind::SweepK) {
            require(&mut errors, "optimizer", self.optimizer.is_some());
            match (self.learning_rate, &self.lr_schedule) {
                (None, None) => {
                    errors.push("learning_rate: set it or lr_schedule (exactly one)".into())
                }
                (Some(_), Some(_)) => {
                    errors.push("learning_rate: conflicts with lr_schedule (set exactly one)".into())
                }
                (Some(rate), None) => {
                    if !(rate > 0.0) {
                        errors.push(format!("learning_rate: must be positive, got {rate}"));
                    }
                }
                (None, Some(pieces)) => {
                    if pieces.first().map(|&(u, _)| u) != Some(0) {
                        errors.push("lr_schedule: first piece must start at update 0".into());
                    }
                    if !pieces.windows(2).all(|w| w[0].0 < w[1].0) {
                        errors.push("lr_schedule: start updates must strictly increase".into());
                    }
                    if pieces.iter().any(|&(_, r)| !(r > 0.0)) {
                        errors.push("lr_schedule: every rate must be positive".into());
                    }
                }
            }
            require(&mut errors, "num_updates", self.num_updates.is_some());
            if self.eval_every == Some(0) {
                errors.push("eval_every: must be at least 1".into());
            }
            if self.theta_every == Some(0) {
                errors.push("theta_every: must be at least 1".into());
            }
            if self.test_samples == Some(0) {
                errors.push("test_samples: must be at least 1".into());
            }
        }

        if cmd == CommandKind::SweepK {
            match &self.k_list {
                None => errors.push("k_list: required for sweep-k".into()),
                Some(ks) => {
                    if ks.is_empty() {
                        errors.push("k_list: must list at least one period".into());
                    }
                    let mut seen = std::collections::BTreeSet::new();
                    for &k in ks {
                        if !seen.insert(k) {
                            errors.push(format!("k_list: duplicate period {k}"));
                        }
                    }
                }
            }
            if estimator.is_some() && estimator != Some(EstimatorKind::Gpes) {
                errors.push("estimator: sweep-k requires gpes".into());
            }
        }

        if cmd == CommandKind::Variance {
            match self.mc_samples {
                None => errors.push("mc_samples: required for variance".into()),
                Some(m) if m < MIN_MC_SAMPLES => errors.push(format!(
                    "mc_samples: need at least {MIN_MC_SAMPLES}, got {m}"
                )),
                Some(_) => {}
            }
        }

        require(&mut errors, "master_seed", self.master_seed.is_some());
        require(&mut errors, "out", self.out.is_some());

        errors
    }

    /// Constraints that relate config keys to the loaded graph's horizon
    /// and parameter dimension.
    pub fn cross_validate(&self, cmd: CommandKind, horizon: usize, param_dim: usize) -> Vec<String> {
        let mut errors = Vec::new();

        if self.estimator != Some(EstimatorKind::FullEs) {
            if let Some(window) = self.window {
                if window > 0 && horizon % window != 0 {
                    errors.push(format!(
                        "window: horizon {horizon} is not divisible by window {window}"
                    ));
                }
            }
        }
        let check_period = |errors: &mut Vec<String>, k: usize| {
            if let Some(window) = self.window {
                if window > 0 && k % window != 0 {
                    errors.push(format!(
                        "noise period {k} is not a multiple of window {window}"
                    ));
                }
                if k < window {
                    errors.push(format!("noise period {k} is below window {window}"));
                }
            }
            if k > horizon {
                errors.push(format!("noise period {k} exceeds horizon {horizon}"));
            }
        };
        if self.estimator == Some(EstimatorKind::Gpes) {
            let sweeping = cmd == CommandKind::SweepK
                || (cmd == CommandKind::Variance && self.k_list.is_some());
            if sweeping {
                for &k in self.k_list.as_deref().unwrap_or(&[]) {
                    check_period(&mut errors, k);
                }
            } else if let Some(k) = self.noise_period {
                check_period(&mut errors, k);
            }
        }
        if let Some(theta) = &self.theta_init {
            if theta.len() != param_dim {
                errors.push(format!(
                    "theta_init: graph has {param_dim} parameters, got {}",
                    theta.len()
                ));
            }
        }

        errors
    }

    /// Estimator settings for the worker pool; `noise_period` may be
    /// overridden per sweep entry. For the stateless full-episode
    /// estimator the window field is unused and pinned to the horizon.
    pub fn estimator_config(&self, horizon: usize, noise_period: Option<usize>) -> EstimatorConfig<f64> {
        let kind = self.estimator.expect("validated");
        EstimatorConfig {
            kind,
            sigma: self.sigma.expect("validated"),
            window: if kind == EstimatorKind::FullEs {
                horizon
            } else {
                self.window.expect("validated")
            },
            noise_period: noise_period.or(self.noise_period),
        }
    }

    /// The learning-rate schedule, constant or piecewise.
    pub fn schedule(&self) -> Result<LrSchedule<f64>, CliError> {
        match (self.learning_rate, &self.lr_schedule) {
            (Some(rate), None) => LrSchedule::new(vec![(0, rate)]),
            (None, Some(pieces)) => LrSchedule::new(pieces.clone()),
            _ => unreachable!("validated: exactly one of learning_rate, lr_schedule"),
        }
        .map_err(|e| CliError::config(format!("lr_schedule: {e}")))
    }

    /// Initial parameters: explicit key, or the benchmark start for the
    /// Lorenz system.
    pub fn initial_theta(&self) -> Vec<f64> {
        match (&self.theta_init, self.graph) {
            (Some(values), _) => values.clone(),
            (None, Some(GraphKind::Lorenz)) => {
                oes_core::lorenz_theta_init::<f64>().values().to_vec()
            }
            (None, _) => unreachable!("validated: theta_init required"),
        }
    }
}

/// A constructed graph plus, for linear graphs, access to the loss
/// specification the closed forms need.
pub enum GraphHandle {
    Lorenz(LorenzGraph<f64>),
    Linear(LinearGraph<f64>),
}

impl GraphHandle {
    pub fn spec(&self) -> Option<&LinearLossSpec<f64>> {
        match self {
            GraphHandle::Lorenz(_) => None,
            GraphHandle::Linear(g) => Some(g.spec()),
        }
    }
}

impl UnrolledGraph<f64> for GraphHandle {
    fn horizon(&self) -> usize {
        match self {
            GraphHandle::Lorenz(g) => g.horizon(),
            GraphHandle::Linear(g) => g.horizon(),
        }
    }
    fn state_dim(&self) -> usize {
        match self {
            GraphHandle::Lorenz(g) => g.state_dim(),
            GraphHandle::Linear(g) => g.state_dim(),
        }
    }
    fn param_dim(&self) -> usize {
        match self {
            GraphHandle::Lorenz(g) => g.param_dim(),
            GraphHandle::Linear(g) => g.param_dim(),
        }
    }
    fn initial_state(&self) -> &[f64] {
        match self {
            GraphHandle::Lorenz(g) => g.initial_state(),
            GraphHandle::Linear(g) => g.initial_state(),
        }
    }
    fn transition_into(&self, t: usize, state: &[f64], params: &[f64], next: &mut [f64]) {
        match self {
            GraphHandle::Lorenz(g) => g.transition_into(t, state, params, next),
            GraphHandle::Linear(g) => g.transition_into(t, state, params, next),
        }
    }
    fn step_loss(&self, t: usize, state: &[f64]) -> f64 {
        match self {
            GraphHandle::Lorenz(g) => g.step_loss(t, state),
            GraphHandle::Linear(g) => g.step_loss(t, state),
        }
    }
}

impl ExperimentConfig {
    /// Builds the configured graph. Spec-file problems come back as
    /// validation messages so they join the combined repair list.
    pub fn load_graph(&self) -> Result<GraphHandle, Vec<String>> {
        match self.graph {
            None => Err(vec![]),
            Some(GraphKind::Lorenz) => {
                let horizon = match self.horizon {
                    Some(t) if t >= 1 => t,
                    _ => return Err(vec![]),
                };
                Ok(GraphHandle::Lorenz(LorenzGraph::new(horizon)))
            }
            Some(GraphKind::Linear) => {
                let Some(path) = &self.linear_spec else {
                    return Err(vec![]);
                };
                let text = match std::fs::read_to_string(path) {
                    Ok(text) => text,
                    Err(e) => return Err(vec![format!("linear_spec: {path}: {e}")]),
                };
                let spec = LinearLossSpec::from_text(&text)
                    .map_err(|e| vec![format!("linear_spec: {path}: {e}")])?;
                if let Some(horizon) = self.horizon {
                    let spec_horizon = spec.horizon();
                    if horizon != spec_horizon {
                        return Err(vec![format!(
                            "horizon: config says {horizon} but the spec file has {spec_horizon}"
                        )]);
                    }
                }
                Ok(GraphHandle::Linear(LinearGraph::new(spec)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorenz_text() -> &'static str {
        "# benchmark run\n\
         graph = lorenz\n\
         horizon = 2000\n\
         estimator = nres\n\
         workers = 200\n\
         window = 100\n\
         sigma = 0.04\n\
         optimizer = sgd\n\
         learning_rate = 1e-5\n\
         num_updates = 2000\n\
         eval_every = 50\n\
         master_seed = 7\n\
         out = run.csv\n"
    }

    #[test]
    fn parses_a_complete_config() {
        let c = ExperimentConfig::parse(lorenz_text()).unwrap();
        assert_eq!(c.graph, Some(GraphKind::Lorenz));
        assert_eq!(c.horizon, Some(2000));
        assert_eq!(c.estimator, Some(EstimatorKind::Nres));
        assert_eq!(c.learning_rate, Some(1e-5));
        assert_eq!(c.eval_every, Some(50));
        assert!(c.validate(CommandKind::Train).is_empty());
    }

    #[test]
    fn collects_every_parse_problem_with_line_numbers() {
        let text = "graph = lorenz\nbogus = 1\nworkers = many\ngraph = linear\njust words\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        let CliError::Config(errors) = err else {
            panic!("expected config error");
        };
        assert_eq!(errors.len(), 4);
        assert!(errors[0].contains("line 2") && errors[0].contains("unknown key"));
        assert!(errors[1].contains("line 3") && errors[1].contains("workers"));
        assert!(errors[2].contains("line 4") && errors[2].contains("duplicate"));
        assert!(errors[3].contains("line 5") && errors[3].contains("key = value"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\n# full line comment\ngraph = lorenz # trailing comment\n\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.graph, Some(GraphKind::Lorenz));
    }

    #[test]
    fn round_trips_through_canonical_text() {
        let c = ExperimentConfig::parse(lorenz_text()).unwrap();
        let again = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn validation_lists_all_missing_keys() {
        let c = ExperimentConfig::parse("graph = lorenz\n").unwrap();
        let errors = c.validate(CommandKind::Train);
        for needle in [
            "horizon",
            "estimator",
            "workers",
            "sigma",
            "learning_rate",
            "num_updates",
            "master_seed",
            "out",
        ] {
            assert!(
                errors.iter().any(|e| e.contains(needle)),
                "no error mentions {needle}: {errors:?}"
            );
        }
    }

    #[test]
    fn schedule_and_rate_are_mutually_exclusive() {
        let mut c = ExperimentConfig::parse(lorenz_text()).unwrap();
        c.lr_schedule = Some(vec![(0, 1e-5), (1000, 1e-6)]);
        let errors = c.validate(CommandKind::Train);
        assert!(errors.iter().any(|e| e.contains("exactly one")));
    }

    #[test]
    fn cross_validation_catches_window_and_period_violations() {
        let mut c = ExperimentConfig::parse(lorenz_text()).unwrap();
        c.window = Some(300);
        let errors = c.cross_validate(CommandKind::Train, 2000, 2);
        assert!(errors.iter().any(|e| e.contains("not divisible")));

        c.window = Some(100);
        c.estimator = Some(EstimatorKind::Gpes);
        c.noise_period = Some(250);
        let errors = c.cross_validate(CommandKind::Train, 2000, 2);
        assert!(errors.iter().any(|e| e.contains("not a multiple")));
    }

    #[test]
    fn sweep_rejects_duplicate_periods() {
        let mut c = ExperimentConfig::parse(lorenz_text()).unwrap();
        c.estimator = Some(EstimatorKind::Gpes);
        c.k_list = Some(vec![100, 200, 100]);
        let errors = c.validate(CommandKind::SweepK);
        assert!(errors.iter().any(|e| e.contains("duplicate period 100")));
    }
}
