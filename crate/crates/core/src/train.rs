//! The training loop: repeatedly average a pool round of gradient
//! estimates and hand the mean to a first-order optimizer, logging losses
//! and unroll-step budgets per update.

use std::time::Instant;

use thiserror::Error;

use crate::estimators::pool::{pool_gradient, WorkerPool};
use crate::estimators::EstimatorError;
use crate::graph::{episode_mean_loss, GraphError, ParamVector, UnrolledGraph};
use crate::optim::{OptimError, Optimizer};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("gradient estimation failed at update {update}: {source}")]
    Estimator { update: u64, source: EstimatorError },
    #[error("evaluation failed at update {update}: {source}")]
    Eval { update: u64, source: GraphError },
    #[error("optimizer failed at update {update}: {source}")]
    Optim { update: u64, source: OptimError },
}

impl TrainError {
    /// The 1-based update index the failure occurred at.
    pub fn update(&self) -> u64 {
        match self {
            TrainError::Estimator { update, .. }
            | TrainError::Eval { update, .. }
            | TrainError::Optim { update, .. } => *update,
        }
    }
}

/// Logging cadences. `eval_every = Some(k)` computes the test loss at
/// updates k, 2k, …; `theta_every` snapshots θ the same way. `None`
/// disables the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    pub num_updates: u64,
    pub eval_every: Option<u64>,
    pub theta_every: Option<u64>,
}

fn at_cadence(update: u64, every: Option<u64>) -> bool {
    match every {
        Some(k) => {
            assert!(k > 0, "cadence must be positive");
            update % k == 0
        }
        None => false,
    }
}

/// One row of the training log. `update` is 1-based; losses are measured
/// after the update was applied; step counters are cumulative and include
/// pool warmup but not evaluation unrolls.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord<F: Scalar> {
    pub update: u64,
    pub train_loss: F,
    pub test_loss: Option<F>,
    pub cum_unroll_steps: u64,
    pub cum_sequential_steps: u64,
    pub wall_ms: u64,
    pub theta: Option<Vec<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog<F: Scalar> {
    pub records: Vec<TrainRecord<F>>,
    pub warmup_unroll_steps: u64,
    pub warmup_sequential_steps: u64,
    pub final_theta: ParamVector<F>,
}

/// Runs `options.num_updates` rounds of pooled estimation plus optimizer
/// update, starting from `theta_init`. `eval` computes the test loss on
/// demand (it sees the post-update θ). Fully deterministic given the
/// pool's seeding, except for the wall-clock column.
pub fn train<F, G, E>(
    graph: &G,
    pool: &mut WorkerPool<F>,
    optimizer: &mut Optimizer<F>,
    theta_init: &ParamVector<F>,
    options: &TrainOptions,
    mut eval: E,
) -> Result<TrainLog<F>, TrainError>
where
    F: Scalar,
    G: UnrolledGraph<F>,
    E: FnMut(&ParamVector<F>) -> Result<F, GraphError>,
{
    let started = Instant::now();
    let mut theta = theta_init.clone();
    let mut records = Vec::with_capacity(options.num_updates as usize);
    let mut cum_unroll_steps = pool.warmup_unroll_steps();
    let mut cum_sequential_steps = pool.warmup_sequential_steps();

    for update in 1..=options.num_updates {
        let step = pool_gradient(pool, graph, &theta)
            .map_err(|source| TrainError::Estimator { update, source })?;
        optimizer
            .update(&mut theta, &step.mean_grad)
            .map_err(|source| TrainError::Optim { update, source })?;
        cum_unroll_steps += step.unroll_steps;
        cum_sequential_steps += step.sequential_steps;

        let train_loss = episode_mean_loss(graph, &theta)
            .map_err(|source| TrainError::Eval { update, source })?;
        let test_loss = if at_cadence(update, options.eval_every) {
            Some(eval(&theta).map_err(|source| TrainError::Eval { update, source })?)
        } else {
            None
        };
        let theta_snapshot = if at_cadence(update, options.theta_every) {
            Some(theta.values().to_vec())
        } else {
            None
        };
        records.push(TrainRecord {
            update,
            train_loss,
            test_loss,
            cum_unroll_steps,
            cum_sequential_steps,
            wall_ms: started.elapsed().as_millis() as u64,
            theta: theta_snapshot,
        });
    }

    Ok(TrainLog {
        records,
        warmup_unroll_steps: pool.warmup_unroll_steps(),
        warmup_sequential_steps: pool.warmup_sequential_steps(),
        final_theta: theta,
    })
}
