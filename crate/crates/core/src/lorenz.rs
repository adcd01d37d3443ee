//! Lorenz-system parameter learning: recover (r, a) from an observed
//! z-coordinate trace of the discretized system.
//!
//! The state (x, y, z) advances by explicit Euler steps with dt = 0.005
//! from s0 = (1.2, 1.3, 1.6). The third coefficient stays fixed at 8/3;
//! the learnable parameter is θ = (ln r, ln a), exponentiated inside every
//! transition so r and a remain positive. The per-step loss is the squared
//! gap between the trajectory's z and a ground-truth trace generated at
//! (r, a) = (28, 10).

use crate::graph::{episode_mean_loss_from, GraphError, ParamVector, UnrolledGraph};
use crate::rng::{substream, EVAL_STREAM};
use crate::scalar::Scalar;

pub const LORENZ_DT: f64 = 0.005;
pub const LORENZ_S0: [f64; 3] = [1.2, 1.3, 1.6];
pub const LORENZ_GROUND_TRUTH_RA: [f64; 2] = [28.0, 10.0];
/// Standard deviation of each initial-state component when sampling test
/// episodes (covariance 0.01·I).
pub const LORENZ_TEST_INIT_STD: f64 = 0.1;

/// θ_gt = (ln 28, ln 10), the parameters that generated the observed trace.
pub fn lorenz_theta_gt<F: Scalar>() -> ParamVector<F> {
    let r = F::from_f64(LORENZ_GROUND_TRUTH_RA[0]).unwrap();
    let a = F::from_f64(LORENZ_GROUND_TRUTH_RA[1]).unwrap();
    ParamVector::new(vec![r.ln(), a.ln()]).expect("finite")
}

/// The optimisation start point θ_init = (3.7, 3.116).
pub fn lorenz_theta_init<F: Scalar>() -> ParamVector<F> {
    ParamVector::new(vec![F::from_f64(3.7).unwrap(), F::from_f64(3.116).unwrap()])
        .expect("finite")
}

/// The Lorenz parameter-learning graph.
pub struct LorenzGraph<F: Scalar> {
    dt: F,
    beta: F,
    s0: [F; 3],
    /// Observed z-trace, entry t-1 for step t. Generated at construction by
    /// unrolling the transition below at θ_gt, so replaying θ_gt reproduces
    /// it bit for bit and the loss at θ_gt is exactly zero.
    z_gt: Vec<F>,
}

impl<F: Scalar> LorenzGraph<F> {
    pub fn new(horizon: usize) -> Self {
        Self::with_initial_state(horizon, LORENZ_S0.map(|v| F::from_f64(v).unwrap()))
    }

    /// Same system observed from a different start: the ground-truth trace
    /// is regenerated from `s0`, so the zero-loss-at-θ_gt invariant holds
    /// for every choice of initial state.
    pub fn with_initial_state(horizon: usize, s0: [F; 3]) -> Self {
        assert!(horizon >= 1, "horizon must be positive");
        let mut graph = Self {
            dt: F::from_f64(LORENZ_DT).unwrap(),
            beta: F::from_f64(8.0 / 3.0).unwrap(),
            s0,
            z_gt: Vec::with_capacity(horizon),
        };
        let theta = lorenz_theta_gt::<F>();
        let mut state = graph.s0.to_vec();
        let mut next = vec![F::zero(); 3];
        for t in 1..=horizon {
            graph.transition_into(t, &state, theta.values(), &mut next);
            state.copy_from_slice(&next);
            debug_assert!(state.iter().all(|v| v.is_finite()));
            graph.z_gt.push(state[2]);
        }
        graph
    }

    pub fn ground_truth_z(&self) -> &[F] {
        &self.z_gt
    }
}

impl<F: Scalar> UnrolledGraph<F> for LorenzGraph<F> {
    fn horizon(&self) -> usize {
        self.z_gt.len()
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> &[F] {
        &self.s0
    }

    fn transition_into(&self, _t: usize, state: &[F], params: &[F], next: &mut [F]) {
        let r = params[0].exp();
        let a = params[1].exp();
        let (x, y, z) = (state[0], state[1], state[2]);
        next[0] = x + a * (y - x) * self.dt;
        next[1] = y + (x * (r - z) - y) * self.dt;
        next[2] = z + (x * y - self.beta * z) * self.dt;
    }

    fn step_loss(&self, t: usize, state: &[F]) -> F {
        let gap = state[2] - self.z_gt[t - 1];
        gap * gap
    }
}

/// Mean episode loss over `num_initial_states` random starts sampled as
/// s0 + init_std·N(0, I) per component. Each start is scored against the
/// ground-truth trajectory regenerated from that same start, so the value
/// measures how well `params` predict a novel initial condition and is
/// exactly zero at θ_gt regardless of the spread. Deterministic given the
/// seed; a diverging sample propagates its error instead of being dropped.
pub fn lorenz_test_loss_with_std<F: Scalar>(
    graph: &LorenzGraph<F>,
    params: &ParamVector<F>,
    num_initial_states: usize,
    rng_seed: u64,
    init_std: F,
) -> Result<F, GraphError> {
    assert!(num_initial_states >= 1, "need at least one initial state");
    let mut rng = substream(rng_seed, EVAL_STREAM);
    let mut total = F::zero();
    for _ in 0..num_initial_states {
        let start = graph
            .s0
            .map(|mu| mu + init_std * F::standard_normal(&mut rng));
        let probe = LorenzGraph::with_initial_state(graph.horizon(), start);
        total += episode_mean_loss_from(&probe, &start, params)?;
    }
    Ok(total / F::from_count(num_initial_states))
}

/// Test loss with the standard initial-state spread (std 0.1 per component).
pub fn lorenz_test_loss<F: Scalar>(
    graph: &LorenzGraph<F>,
    params: &ParamVector<F>,
    num_initial_states: usize,
    rng_seed: u64,
) -> Result<F, GraphError> {
    lorenz_test_loss_with_std(
        graph,
        params,
        num_initial_states,
        rng_seed,
        F::from_f64(LORENZ_TEST_INIT_STD).unwrap(),
    )
}
