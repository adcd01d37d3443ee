//! A pool of estimator workers whose episode positions are deliberately
//! desynchronized ("step-unlocked"): worker i draws a window start τ_i
//! uniformly from {0, W, …, T−W} and burns τ_i / W gradient calls at the
//! initial parameters to reach it. After warmup the pool's window starts
//! stay spread across the episode, so the mean over workers sees every
//! part of the horizon at every update instead of all workers crossing
//! the same windows in lockstep.

use rand::Rng;
use rayon::prelude::*;

use super::{EsWorker, EstimatorConfig, EstimatorError, EstimatorKind, TruncationClock};
use crate::graph::{ParamVector, UnrolledGraph};
use crate::rng::substream;
use crate::scalar::{add_assign, Scalar};

/// The mean gradient over one pool-wide round of estimates, with its
/// unroll-step cost: `unroll_steps` sums over workers (total compute),
/// `sequential_steps` is the per-worker maximum (wall-clock critical
/// path when workers run in parallel).
#[derive(Debug, Clone, PartialEq)]
pub struct PoolStep<F: Scalar> {
    pub mean_grad: Vec<F>,
    pub unroll_steps: u64,
    pub sequential_steps: u64,
}

#[derive(Debug, Clone)]
pub struct WorkerPool<F: Scalar> {
    workers: Vec<EsWorker<F>>,
    warmup_calls: Vec<usize>,
    steps_per_estimate: usize,
}

/// Builds a pool whose workers use RNG streams `stream_base + i`. Online
/// workers draw their warmup offset from their own stream before any
/// noise, then replay `τ_i / W` discarded estimates at `theta_init`;
/// full-episode workers have no episode position and skip warmup.
pub(crate) fn build_pool<F, G>(
    config: &EstimatorConfig<F>,
    num_workers: usize,
    graph: &G,
    theta_init: &ParamVector<F>,
    master_seed: u64,
    stream_base: u64,
) -> Result<WorkerPool<F>, EstimatorError>
where
    F: Scalar,
    G: UnrolledGraph<F>,
{
    if num_workers == 0 {
        return Err(EstimatorError::NoWorkers);
    }
    let mut workers = Vec::with_capacity(num_workers);
    let mut warmup_calls = Vec::with_capacity(num_workers);
    for i in 0..num_workers {
        let mut rng = substream(master_seed, stream_base + i as u64);
        let calls = if config.kind == EstimatorKind::FullEs {
            0
        } else {
            let clock = TruncationClock::new(config.window, graph.horizon())?;
            rng.random_range(0..clock.windows_per_episode())
        };
        let mut worker = config.build_worker(graph, rng)?;
        for _ in 0..calls {
            worker.gradient_estimate(graph, theta_init).map_err(|e| {
                EstimatorError::Worker {
                    index: i,
                    source: Box::new(e),
                }
            })?;
        }
        workers.push(worker);
        warmup_calls.push(calls);
    }
    Ok(WorkerPool {
        workers,
        warmup_calls,
        steps_per_estimate: config.steps_per_estimate(graph.horizon()),
    })
}

/// Builds a step-unlocked pool on the default stream range 0..N.
pub fn make_step_unlocked_pool<F, G>(
    config: &EstimatorConfig<F>,
    num_workers: usize,
    graph: &G,
    theta_init: &ParamVector<F>,
    master_seed: u64,
) -> Result<WorkerPool<F>, EstimatorError>
where
    F: Scalar,
    G: UnrolledGraph<F>,
{
    build_pool(config, num_workers, graph, theta_init, master_seed, 0)
}

/// Runs one gradient estimate on every worker (in parallel) and averages
/// them in worker-index order, which keeps the result independent of
/// scheduling. On failure the lowest-index error is reported and the
/// diverged worker stays poisoned.
pub fn pool_gradient<F, G>(
    pool: &mut WorkerPool<F>,
    graph: &G,
    theta: &ParamVector<F>,
) -> Result<PoolStep<F>, EstimatorError>
where
    F: Scalar,
    G: UnrolledGraph<F>,
{
    let results: Vec<_> = pool
        .workers
        .par_iter_mut()
        .map(|worker| worker.gradient_estimate(graph, theta))
        .collect();
    let count = results.len();
    let mut mean_grad = vec![F::zero(); theta.dim()];
    let mut unroll_steps = 0u64;
    let mut sequential_steps = 0u64;
    for (index, result) in results.into_iter().enumerate() {
        let sample = result.map_err(|e| EstimatorError::Worker {
            index,
            source: Box::new(e),
        })?;
        if sample.grad.len() != mean_grad.len() {
            return Err(EstimatorError::ParamDim {
                expected: mean_grad.len(),
                got: sample.grad.len(),
            });
        }
        add_assign(&mut mean_grad, &sample.grad);
        unroll_steps += sample.unroll_steps_consumed as u64;
        sequential_steps = sequential_steps.max(sample.unroll_steps_consumed as u64);
    }
    let inv = F::one() / F::from_count(count);
    mean_grad.iter_mut().for_each(|v| *v *= inv);
    Ok(PoolStep {
        mean_grad,
        unroll_steps,
        sequential_steps,
    })
}

impl<F: Scalar> WorkerPool<F> {
    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    pub fn workers(&self) -> &[EsWorker<F>] {
        &self.workers
    }

    /// Discarded gradient calls each worker spent reaching its offset.
    pub fn warmup_calls(&self) -> &[usize] {
        &self.warmup_calls
    }

    /// Total unroll steps spent on warmup across the pool.
    pub fn warmup_unroll_steps(&self) -> u64 {
        self.warmup_calls
            .iter()
            .map(|&c| c as u64 * self.steps_per_estimate as u64)
            .sum()
    }

    /// Warmup steps along the critical path: the largest single worker's
    /// share.
    pub fn warmup_sequential_steps(&self) -> u64 {
        self.warmup_calls
            .iter()
            .map(|&c| c as u64 * self.steps_per_estimate as u64)
            .max()
            .unwrap_or(0)
    }

    pub fn steps_per_estimate(&self) -> usize {
        self.steps_per_estimate
    }

    /// Current window start of every worker, in index order.
    pub fn window_starts(&self) -> Vec<usize> {
        self.workers.iter().map(|w| w.window_start()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{LinearGraph, LinearLossSpec};

    fn config(kind: EstimatorKind) -> EstimatorConfig<f64> {
        EstimatorConfig {
            kind,
            sigma: 0.1,
            window: 2,
            noise_period: None,
        }
    }

    #[test]
    fn warmup_spreads_window_starts() {
        let graph = LinearGraph::new(LinearLossSpec::random(8, 2, 77));
        let theta = ParamVector::zeros(2);
        let pool =
            make_step_unlocked_pool(&config(EstimatorKind::Nres), 32, &graph, &theta, 123).unwrap();
        let starts = pool.window_starts();
        for (&start, &calls) in starts.iter().zip(pool.warmup_calls()) {
            assert_eq!(start % 2, 0);
            assert_eq!(start, 2 * calls);
        }
        // With 32 workers and 4 window slots, every slot should be hit.
        for slot in [0usize, 2, 4, 6] {
            assert!(starts.contains(&slot), "slot {slot} never drawn");
        }
        assert_eq!(
            pool.warmup_unroll_steps(),
            pool.warmup_calls().iter().map(|&c| c as u64 * 4).sum::<u64>()
        );
        assert_eq!(
            pool.warmup_sequential_steps(),
            pool.warmup_calls().iter().map(|&c| c as u64 * 4).max().unwrap()
        );
    }

    #[test]
    fn fulles_workers_skip_warmup() {
        let graph = LinearGraph::new(LinearLossSpec::random(8, 2, 77));
        let theta = ParamVector::zeros(2);
        let pool =
            make_step_unlocked_pool(&config(EstimatorKind::FullEs), 4, &graph, &theta, 123)
                .unwrap();
        assert_eq!(pool.warmup_calls(), &[0, 0, 0, 0]);
        assert_eq!(pool.warmup_unroll_steps(), 0);
        assert_eq!(pool.steps_per_estimate(), 16);
    }

    #[test]
    fn pool_gradient_is_deterministic_and_counts_steps() {
        let graph = LinearGraph::new(LinearLossSpec::random(8, 3, 5));
        let theta = ParamVector::zeros(3);
        let run = || {
            let mut pool =
                make_step_unlocked_pool(&config(EstimatorKind::Pes), 8, &graph, &theta, 9)
                    .unwrap();
            let mut grads = Vec::new();
            for _ in 0..5 {
                let step = pool_gradient(&mut pool, &graph, &theta).unwrap();
                assert_eq!(step.unroll_steps, 8 * 4);
                assert_eq!(step.sequential_steps, 4);
                grads.push(step.mean_grad);
            }
            grads
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(&b) {
            let (x_bits, y_bits): (Vec<u64>, Vec<u64>) = (
                x.iter().map(|v| v.to_bits()).collect(),
                y.iter().map(|v| v.to_bits()).collect(),
            );
            assert_eq!(x_bits, y_bits);
        }
    }

    #[test]
    fn empty_pool_is_rejected() {
        let graph = LinearGraph::new(LinearLossSpec::random(8, 2, 1));
        let theta = ParamVector::zeros(2);
        let err = make_step_unlocked_pool(&config(EstimatorKind::Nres), 0, &graph, &theta, 1)
            .unwrap_err();
        assert_eq!(err, EstimatorError::NoWorkers);
    }
}
