//! The family of antithetic evolution-strategies gradient estimators.
//!
//! All estimators perturb the parameter vector with Gaussian noise ε and
//! difference the losses of a θ+ε and a θ−ε unroll. They differ in how
//! much of the episode one estimate covers and how long a drawn ε is
//! reused:
//!
//! * [`fulles::FullEsWorker`]: stateless; unrolls a whole episode per
//!   estimate (2T steps).
//! * [`tes::TesWorker`]: truncated windows with fresh noise each window;
//!   biased towards short-range dependencies (3W steps).
//! * [`pes::PesWorker`]: truncated windows with fresh noise each window
//!   plus a cumulative noise ξ to stay unbiased (2W steps).
//! * [`gpes::GpesWorker`]: persistent-style estimator with a noise-sharing
//!   period K: one ε serves K consecutive steps (2W steps).
//! * [`nres::NresWorker`]: the K = T special case: one ε per episode, no
//!   cumulative noise needed (2W steps).
//!
//! The online workers are stateful: they carry saved antithetic states and
//! a truncation clock from call to call, and reset at episode end.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{unroll_span, ParamVector, UnrolledGraph};
use crate::scalar::Scalar;

pub mod fulles;
pub mod gpes;
pub mod nres;
pub mod pes;
pub mod pool;
pub mod tes;

pub use fulles::{fulles_estimate, fulles_estimate_with_noise, FullEsWorker};
pub use gpes::GpesWorker;
pub use nres::NresWorker;
pub use pes::PesWorker;
pub use pool::{make_step_unlocked_pool, pool_gradient, PoolStep, WorkerPool};
pub use tes::TesWorker;

/// Which unroll direction failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
    /// The trailing unperturbed unroll that advances a TES worker's saved
    /// state.
    Unperturbed,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
            Branch::Unperturbed => "unperturbed",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("sigma must be finite and positive, got {got}")]
    InvalidSigma { got: f64 },
    #[error("window must be positive and divide the horizon; got window {window}, horizon {horizon}")]
    WindowHorizon { window: usize, horizon: usize },
    #[error(
        "noise period must be a multiple of the window and lie in [window, horizon]; \
         got period {period}, window {window}, horizon {horizon}"
    )]
    NoisePeriod {
        period: usize,
        window: usize,
        horizon: usize,
    },
    #[error("noise period is required for the gpes estimator")]
    MissingNoisePeriod,
    #[error("worker count must be positive")]
    NoWorkers,
    #[error("parameter dimension {got} does not match the configured {expected}")]
    ParamDim { expected: usize, got: usize },
    #[error("graph incompatible with this worker: {what} differs from construction")]
    GraphMismatch { what: &'static str },
    #[error("unroll diverged at step {step} on the {branch} branch")]
    Diverged { step: usize, branch: Branch },
    #[error("worker poisoned by an earlier divergence; call reset() first")]
    Poisoned,
    #[error("worker {index}: {source}")]
    Worker {
        index: usize,
        source: Box<EstimatorError>,
    },
}

/// Smoothing-noise configuration: ε ~ N(0, σ²I) in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig<F: Scalar> {
    sigma: F,
    param_dim: usize,
}

impl<F: Scalar> NoiseConfig<F> {
    pub fn new(sigma: F, param_dim: usize) -> Result<Self, EstimatorError> {
        if !(sigma.is_finite() && sigma > F::zero()) {
            return Err(EstimatorError::InvalidSigma {
                got: sigma.to_f64().unwrap_or(f64::NAN),
            });
        }
        assert!(param_dim >= 1, "param_dim must be positive");
        Ok(Self { sigma, param_dim })
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    /// Draws ε ~ N(0, σ²I).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<F> {
        (0..self.param_dim)
            .map(|_| self.sigma * F::standard_normal(rng))
            .collect()
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, eps: &mut [F]) {
        for e in eps.iter_mut() {
            *e = self.sigma * F::standard_normal(rng);
        }
    }
}

/// Position of an online worker inside its episode: the current window
/// start τ, the window length W, and the horizon T, with T divisible by W
/// and τ a multiple of W in [0, T−W].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationClock {
    tau: usize,
    window: usize,
    horizon: usize,
}

impl TruncationClock {
    pub fn new(window: usize, horizon: usize) -> Result<Self, EstimatorError> {
        if window == 0 || horizon == 0 || horizon % window != 0 {
            return Err(EstimatorError::WindowHorizon { window, horizon });
        }
        Ok(Self {
            tau: 0,
            window,
            horizon,
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn windows_per_episode(&self) -> usize {
        self.horizon / self.window
    }

    /// Moves to the next window; returns true when the episode ended and
    /// the clock wrapped back to τ = 0.
    fn advance(&mut self) -> bool {
        self.tau += self.window;
        if self.tau >= self.horizon {
            self.tau = 0;
            true
        } else {
            false
        }
    }

    fn rewind(&mut self) {
        self.tau = 0;
    }
}

/// One gradient estimate plus its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample<F: Scalar> {
    pub grad: Vec<F>,
    /// The window start τ this estimate covered.
    pub window_start: usize,
    /// Unroll steps spent producing it: 2W for pes/gpes/nres, 3W for tes,
    /// 2T for fulles.
    pub unroll_steps_consumed: usize,
}

/// The remainder shifted into [1, y]: the unique n in that range with
/// x = q·y + n for an integer q.
pub fn mod_dagger(x: usize, y: usize) -> usize {
    assert!(x >= 1 && y >= 1, "mod_dagger requires positive arguments");
    (x - 1) % y + 1
}

/// `(L⁺ − L⁻) / (2σ²n) · noise`, the antithetic scale common to every
/// estimator; `n` is the number of steps entering the loss sums. All
/// estimators route through this one expression so that configurations
/// which are algebraically identical are also bit-identical.
pub(crate) fn scaled_noise<F: Scalar>(
    loss_plus: F,
    loss_minus: F,
    sigma: F,
    steps: usize,
    noise: &[F],
) -> Vec<F> {
    let scale = (loss_plus - loss_minus) / (F::two() * sigma * sigma * F::from_count(steps));
    noise.iter().map(|&e| e * scale).collect()
}

/// State and scratch shared by the online workers: the truncation clock,
/// the saved antithetic state pair, the current noise, and the RNG stream.
#[derive(Debug, Clone)]
pub(crate) struct OnlineCore<F: Scalar> {
    pub clock: TruncationClock,
    pub noise: NoiseConfig<F>,
    pub rng: ChaCha8Rng,
    pub s0: Vec<F>,
    pub s_plus: Vec<F>,
    pub s_minus: Vec<F>,
    pub eps: Vec<F>,
    next: Vec<F>,
    theta_plus: Vec<F>,
    theta_minus: Vec<F>,
    pub poisoned: bool,
}

impl<F: Scalar> OnlineCore<F> {
    pub fn new<G: UnrolledGraph<F>>(
        graph: &G,
        sigma: F,
        window: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self, EstimatorError> {
        let noise = NoiseConfig::new(sigma, graph.param_dim())?;
        let clock = TruncationClock::new(window, graph.horizon())?;
        let s0 = graph.initial_state().to_vec();
        let d = noise.param_dim();
        Ok(Self {
            clock,
            noise,
            rng,
            s_plus: s0.clone(),
            s_minus: s0.clone(),
            next: vec![F::zero(); s0.len()],
            s0,
            eps: vec![F::zero(); d],
            theta_plus: vec![F::zero(); d],
            theta_minus: vec![F::zero(); d],
            poisoned: false,
        })
    }

    pub fn ensure_ready<G: UnrolledGraph<F>>(
        &self,
        graph: &G,
        theta: &ParamVector<F>,
    ) -> Result<(), EstimatorError> {
        if self.poisoned {
            return Err(EstimatorError::Poisoned);
        }
        if graph.horizon() != self.clock.horizon() {
            return Err(EstimatorError::GraphMismatch { what: "horizon" });
        }
        if graph.state_dim() != self.s0.len() {
            return Err(EstimatorError::GraphMismatch { what: "state_dim" });
        }
        if graph.param_dim() != self.noise.param_dim() {
            return Err(EstimatorError::GraphMismatch { what: "param_dim" });
        }
        if theta.dim() != self.noise.param_dim() {
            return Err(EstimatorError::ParamDim {
                expected: self.noise.param_dim(),
                got: theta.dim(),
            });
        }
        Ok(())
    }

    pub fn draw_noise(&mut self) {
        let Self { noise, rng, eps, .. } = self;
        noise.sample_into(rng, eps);
    }

    /// Fills the θ±ε scratch buffers from the current noise.
    pub fn set_perturbed(&mut self, theta: &ParamVector<F>) {
        for ((plus, minus), (&th, &e)) in self
            .theta_plus
            .iter_mut()
            .zip(self.theta_minus.iter_mut())
            .zip(theta.values().iter().zip(self.eps.iter()))
        {
            *plus = th + e;
            *minus = th - e;
        }
    }

    /// Antithetically unrolls `len` steps from the saved state pair under
    /// the θ±ε buffers, advancing the pair in place. Returns both loss
    /// sums; a divergence poisons the worker and names branch and step.
    pub fn antithetic_span<G: UnrolledGraph<F>>(
        &mut self,
        graph: &G,
        t_start: usize,
        len: usize,
    ) -> Result<(F, F), EstimatorError> {
        let plus = unroll_span(
            graph,
            &mut self.s_plus,
            &mut self.next,
            &self.theta_plus,
            t_start,
            len,
        );
        let loss_plus = match plus {
            Ok(l) => l,
            Err(step) => {
                self.poisoned = true;
                return Err(EstimatorError::Diverged {
                    step,
                    branch: Branch::Plus,
                });
            }
        };
        let minus = unroll_span(
            graph,
            &mut self.s_minus,
            &mut self.next,
            &self.theta_minus,
            t_start,
            len,
        );
        let loss_minus = match minus {
            Ok(l) => l,
            Err(step) => {
                self.poisoned = true;
                return Err(EstimatorError::Diverged {
                    step,
                    branch: Branch::Minus,
                });
            }
        };
        Ok((loss_plus, loss_minus))
    }

    /// Advances a single state through `len` unperturbed steps (the TES
    /// trailing unroll). Poisons on divergence.
    pub fn plain_span<G: UnrolledGraph<F>>(
        &mut self,
        graph: &G,
        state: &mut [F],
        theta: &ParamVector<F>,
        t_start: usize,
        len: usize,
    ) -> Result<(), EstimatorError> {
        match unroll_span(graph, state, &mut self.next, theta.values(), t_start, len) {
            Ok(_) => Ok(()),
            Err(step) => {
                self.poisoned = true;
                Err(EstimatorError::Diverged {
                    step,
                    branch: Branch::Unperturbed,
                })
            }
        }
    }

    /// Puts the saved antithetic pair back at s0.
    pub fn reset_states(&mut self) {
        self.s_plus.copy_from_slice(&self.s0);
        self.s_minus.copy_from_slice(&self.s0);
    }

    /// Clears poisoning and episode position: τ = 0, states at s0. The RNG
    /// stream keeps its position so resets never replay noise.
    pub fn reset(&mut self) {
        self.poisoned = false;
        self.clock.rewind();
        self.reset_states();
    }
}

/// The estimator kinds, as named in configuration files and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    FullEs,
    Tes,
    Pes,
    Gpes,
    Nres,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::FullEs => "fulles",
            EstimatorKind::Tes => "tes",
            EstimatorKind::Pes => "pes",
            EstimatorKind::Gpes => "gpes",
            EstimatorKind::Nres => "nres",
        })
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fulles" => Ok(EstimatorKind::FullEs),
            "tes" => Ok(EstimatorKind::Tes),
            "pes" => Ok(EstimatorKind::Pes),
            "gpes" => Ok(EstimatorKind::Gpes),
            "nres" => Ok(EstimatorKind::Nres),
            other => Err(format!(
                "unknown estimator `{other}` (expected fulles, tes, pes, gpes, or nres)"
            )),
        }
    }
}

/// An estimator kind plus its hyperparameters; builds workers bound to a
/// graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig<F: Scalar> {
    pub kind: EstimatorKind,
    pub sigma: F,
    /// Truncation window W; ignored by `FullEs`.
    pub window: usize,
    /// Noise-sharing period K; required exactly for `Gpes`.
    pub noise_period: Option<usize>,
}

impl<F: Scalar> EstimatorConfig<F> {
    pub fn build_worker<G: UnrolledGraph<F>>(
        &self,
        graph: &G,
        rng: ChaCha8Rng,
    ) -> Result<EsWorker<F>, EstimatorError> {
        Ok(match self.kind {
            EstimatorKind::FullEs => {
                EsWorker::FullEs(FullEsWorker::new(graph, self.sigma, rng)?)
            }
            EstimatorKind::Tes => {
                EsWorker::Tes(TesWorker::new(graph, self.sigma, self.window, rng)?)
            }
            EstimatorKind::Pes => {
                EsWorker::Pes(PesWorker::new(graph, self.sigma, self.window, rng)?)
            }
            EstimatorKind::Gpes => {
                let period = self
                    .noise_period
                    .ok_or(EstimatorError::MissingNoisePeriod)?;
                EsWorker::Gpes(GpesWorker::new(graph, self.sigma, self.window, period, rng)?)
            }
            EstimatorKind::Nres => {
                EsWorker::Nres(NresWorker::new(graph, self.sigma, self.window, rng)?)
            }
        })
    }

    /// Unroll steps one gradient estimate costs.
    pub fn steps_per_estimate(&self, horizon: usize) -> usize {
        match self.kind {
            EstimatorKind::FullEs => 2 * horizon,
            EstimatorKind::Tes => 3 * self.window,
            _ => 2 * self.window,
        }
    }
}

/// Any estimator worker behind one interface, so pools and the variance
/// laboratory can hold mixed configurations without dynamic dispatch.
#[derive(Debug, Clone)]
pub enum EsWorker<F: Scalar> {
    FullEs(FullEsWorker<F>),
    Tes(TesWorker<F>),
    Pes(PesWorker<F>),
    Gpes(GpesWorker<F>),
    Nres(NresWorker<F>),
}

impl<F: Scalar> EsWorker<F> {
    /// Produces the next gradient estimate, advancing the worker's episode
    /// position and saved states per its algorithm.
    pub fn gradient_estimate<G: UnrolledGraph<F>>(
        &mut self,
        graph: &G,
        theta: &ParamVector<F>,
    ) -> Result<GradientSample<F>, EstimatorError> {
        match self {
            EsWorker::FullEs(w) => w.gradient_estimate(graph, theta),
            EsWorker::Tes(w) => w.gradient_estimate(graph, theta),
            EsWorker::Pes(w) => w.gradient_estimate(graph, theta),
            EsWorker::Gpes(w) => w.gradient_estimate(graph, theta),
            EsWorker::Nres(w) => w.gradient_estimate(graph, theta),
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            EsWorker::FullEs(_) => EstimatorKind::FullEs,
            EsWorker::Tes(_) => EstimatorKind::Tes,
            EsWorker::Pes(_) => EstimatorKind::Pes,
            EsWorker::Gpes(_) => EstimatorKind::Gpes,
            EsWorker::Nres(_) => EstimatorKind::Nres,
        }
    }

    /// Current window start τ (always 0 for the stateless full-episode
    /// estimator).
    pub fn window_start(&self) -> usize {
        match self {
            EsWorker::FullEs(_) => 0,
            EsWorker::Tes(w) => w.window_start(),
            EsWorker::Pes(w) => w.window_start(),
            EsWorker::Gpes(w) => w.window_start(),
            EsWorker::Nres(w) => w.window_start(),
        }
    }

    pub fn is_poisoned(&self) -> bool {
        match self {
            EsWorker::FullEs(_) => false,
            EsWorker::Tes(w) => w.is_poisoned(),
            EsWorker::Pes(w) => w.is_poisoned(),
            EsWorker::Gpes(w) => w.is_poisoned(),
            EsWorker::Nres(w) => w.is_poisoned(),
        }
    }

    /// Clears poisoning and returns the worker to the start of an episode.
    /// The RNG stream keeps its position.
    pub fn reset(&mut self) {
        match self {
            EsWorker::FullEs(_) => {}
            EsWorker::Tes(w) => w.reset(),
            EsWorker::Pes(w) => w.reset(),
            EsWorker::Gpes(w) => w.reset(),
            EsWorker::Nres(w) => w.reset(),
        }
    }
}
