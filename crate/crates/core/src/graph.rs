//! The unrolled-computation-graph abstraction: a horizon-`T` dynamical
//! system whose state advances through `T` transition steps, each driven by
//! the same parameter vector and each emitting a scalar loss.

use thiserror::Error;

use crate::scalar::Scalar;

/// Errors from graph construction and unrolling.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("step index {t} outside 1..={horizon}")]
    StepOutOfRange { t: usize, horizon: usize },
    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite parameter entry at index {index}")]
    NonFiniteParam { index: usize },
    #[error("state or loss became non-finite at step {step}")]
    Diverged { step: usize },
}

/// The learnable parameter θ ∈ R^d shared across all unroll steps.
///
/// Entries are guaranteed finite at construction; code that mutates the
/// values re-checks the invariant afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<F: Scalar> {
    values: Vec<F>,
}

impl<F: Scalar> ParamVector<F> {
    pub fn new(values: Vec<F>) -> Result<Self, GraphError> {
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(GraphError::NonFiniteParam { index });
            }
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![F::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }
}

/// A horizon-`T` dynamical system: initial state, per-step transition, and
/// per-step scalar loss.
///
/// Implementations must be deterministic pure functions of their arguments;
/// any internal randomness has to be frozen at construction. Instances are
/// immutable once built and shareable across threads, while trajectory
/// state is always owned by the caller.
pub trait UnrolledGraph<F: Scalar>: Sync {
    /// Number of unroll steps `T`.
    fn horizon(&self) -> usize;

    /// State dimension `p`.
    fn state_dim(&self) -> usize;

    /// Parameter dimension `d`.
    fn param_dim(&self) -> usize;

    /// Initial state `s0`.
    fn initial_state(&self) -> &[F];

    /// Writes `f_t(state; params)` into `next` for a 1-based step index
    /// `t ∈ 1..=T`. Callers guarantee slice lengths and the step range.
    fn transition_into(&self, t: usize, state: &[F], params: &[F], next: &mut [F]);

    /// Loss of the state reached after step `t`.
    fn step_loss(&self, t: usize, state: &[F]) -> F;
}

pub(crate) fn check_params<F: Scalar>(
    graph: &(impl UnrolledGraph<F> + ?Sized),
    params: &ParamVector<F>,
) -> Result<(), GraphError> {
    if params.dim() != graph.param_dim() {
        return Err(GraphError::DimensionMismatch {
            what: "params",
            expected: graph.param_dim(),
            got: params.dim(),
        });
    }
    Ok(())
}

/// Advances `state` in place through steps `t_start+1 ..= t_start+len`
/// under one fixed parameter slice, returning the sum of per-step losses.
/// A non-finite state entry or loss reports the offending 1-based step.
pub(crate) fn unroll_span<F: Scalar>(
    graph: &(impl UnrolledGraph<F> + ?Sized),
    state: &mut [F],
    next: &mut [F],
    params: &[F],
    t_start: usize,
    len: usize,
) -> Result<F, usize> {
    let mut loss_sum = F::zero();
    for i in 1..=len {
        let t = t_start + i;
        graph.transition_into(t, state, params, next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(t);
        }
        state.copy_from_slice(next);
        let loss = graph.step_loss(t, state);
        if !loss.is_finite() {
            return Err(t);
        }
        loss_sum += loss;
    }
    Ok(loss_sum)
}

/// One validated transition: returns `f_t(state; θ)` and the loss of the
/// new state.
pub fn unroll_step<F: Scalar>(
    graph: &(impl UnrolledGraph<F> + ?Sized),
    state: &[F],
    t: usize,
    params: &ParamVector<F>,
) -> Result<(Vec<F>, F), GraphError> {
    if t < 1 || t > graph.horizon() {
        return Err(GraphError::StepOutOfRange {
            t,
            horizon: graph.horizon(),
        });
    }
    if state.len() != graph.state_dim() {
        return Err(GraphError::DimensionMismatch {
            what: "state",
            expected: graph.state_dim(),
            got: state.len(),
        });
    }
    check_params(graph, params)?;
    let mut cur = state.to_vec();
    let mut next = vec![F::zero(); state.len()];
    let loss = unroll_span(graph, &mut cur, &mut next, params.values(), t - 1, 1)
        .map_err(|step| GraphError::Diverged { step })?;
    Ok((cur, loss))
}

/// Mean per-step loss of the trajectory unrolled from `start` under a
/// constant parameter vector.
pub fn episode_mean_loss_from<F: Scalar>(
    graph: &(impl UnrolledGraph<F> + ?Sized),
    start: &[F],
    params: &ParamVector<F>,
) -> Result<F, GraphError> {
    if start.len() != graph.state_dim() {
        return Err(GraphError::DimensionMismatch {
            what: "state",
            expected: graph.state_dim(),
            got: start.len(),
        });
    }
    check_params(graph, params)?;
    let mut state = start.to_vec();
    let mut next = vec![F::zero(); state.len()];
    let total = unroll_span(
        graph,
        &mut state,
        &mut next,
        params.values(),
        0,
        graph.horizon(),
    )
    .map_err(|step| GraphError::Diverged { step })?;
    Ok(total / F::from_count(graph.horizon()))
}

/// Mean per-step loss of the episode unrolled from `s0`.
pub fn episode_mean_loss<F: Scalar>(
    graph: &(impl UnrolledGraph<F> + ?Sized),
    params: &ParamVector<F>,
) -> Result<F, GraphError> {
    let start = graph.initial_state().to_vec();
    episode_mean_loss_from(graph, &start, params)
}
