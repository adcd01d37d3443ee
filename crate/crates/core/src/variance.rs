//! Variance laboratory: exact total variance (trace of the estimator
//! covariance) on linear loss specifications, Monte-Carlo total variance
//! for any estimator on any graph, the window-sum condition under which
//! averaged noise-reuse estimates beat a full-episode estimate, and a
//! Gaussian fourth-moment gate for the RNG.

use rayon::prelude::*;
use thiserror::Error;

use crate::estimators::pool::{build_pool, pool_gradient};
use crate::estimators::{EstimatorConfig, EstimatorError, EstimatorKind, NoiseConfig};
use crate::graph::{ParamVector, UnrolledGraph};
use crate::linear::LinearLossSpec;
use crate::rng::{sample_stream_base, substream};
use crate::scalar::{add_assign, norm_sq, Scalar};

/// Minimum Monte-Carlo sample count for [`mc_total_variance`].
pub const MIN_MC_SAMPLES: usize = 100;
/// Minimum sample count for [`fourth_moment_check`].
pub const MIN_FOURTH_MOMENT_SAMPLES: usize = 10_000;
/// Batches used for the trace standard error.
const SE_BATCHES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarianceError {
    #[error("need at least {min} Monte-Carlo samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        source: EstimatorError,
    },
}

/// A Monte-Carlo total-variance measurement of one estimator setting,
/// optionally paired with its closed form (available on linear graphs
/// with unit windows; the caller fills it in).
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport<F: Scalar> {
    pub kind: EstimatorKind,
    pub window: usize,
    pub noise_period: Option<usize>,
    /// Workers averaged per sample (1 measures a single estimate).
    pub workers: usize,
    pub samples: usize,
    pub closed_form: Option<F>,
    pub mc_total_variance: F,
    /// Standard error of the trace estimate, from batch means.
    pub stderr: F,
    pub mc_mean: Vec<F>,
}

fn diff_norm_sq<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// Exact total variance of the unit-window noise-sharing estimator with
/// period `noise_period` on a linear loss specification:
///
/// (d+2)/T·Σ_t ‖g^t‖²  −  ‖(1/T)Σ_t g^t‖²
///   + (1/T)·Σ_t (d/2)·Σ_{j,j'} ‖g^t_{c,j} − g^t_{c,j'}‖²
///
/// where g^t sums step t's per-application gradients, the inner double
/// sum runs over ordered pairs of period-c blocks of those applications,
/// and d is the parameter dimension. The pair spread is the only term
/// the period influences; it vanishes at c = T.
pub fn closed_form_gpes_variance<F: Scalar>(
    spec: &LinearLossSpec<F>,
    noise_period: usize,
) -> F {
    let horizon = spec.horizon();
    assert!(
        noise_period >= 1 && noise_period <= horizon,
        "noise period must lie in [1, horizon]"
    );
    let d_f = F::from_count(spec.param_dim());
    let t_f = F::from_count(horizon);

    let mut sum_norms = F::zero();
    let mut pair_spread = F::zero();
    for t in 1..=horizon {
        sum_norms += norm_sq(&spec.g_total(t));
        let windows = spec.num_windows(t, noise_period);
        if windows > 1 {
            let sums: Vec<Vec<F>> = (1..=windows)
                .map(|j| spec.window_sum(t, noise_period, j))
                .collect();
            let mut unordered = F::zero();
            for j in 0..windows {
                for jp in (j + 1)..windows {
                    unordered += diff_norm_sq(&sums[j], &sums[jp]);
                }
            }
            // Ordered pairs double the unordered sum; with the d/2 factor
            // the per-t contribution is d · Σ_{j<j'} ‖Δ‖².
            pair_spread += d_f * unordered;
        }
    }
    (d_f + F::two()) / t_f * sum_norms - norm_sq(&spec.mean_gradient()) + pair_spread / t_f
}

/// Exact total variance of the full-episode estimator on a linear loss
/// specification: (d+1)·‖(1/T)Σ_t g^t‖².
pub fn closed_form_fulles_variance<F: Scalar>(spec: &LinearLossSpec<F>) -> F {
    let d_f = F::from_count(spec.param_dim());
    (d_f + F::one()) * norm_sq(&spec.mean_gradient())
}

/// Outcome of the window-sum comparison: when `lhs ≤ rhs`, averaging T/W
/// independent noise-reuse estimates has total variance at most that of
/// one full-episode estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport<F: Scalar> {
    /// Σ_k ‖Σ_{t in episode block k} g^t‖² over the T/W length-W blocks.
    pub lhs: F,
    /// ((d+1)/(d+2))·‖Σ_t g^t‖².
    pub rhs: F,
    pub holds: bool,
}

/// Evaluates the window-sum condition for truncation length `window` on a
/// linear loss specification. Errors if the window does not divide the
/// horizon.
pub fn window_sum_condition<F: Scalar>(
    spec: &LinearLossSpec<F>,
    window: usize,
) -> Result<ConditionReport<F>, EstimatorError> {
    let horizon = spec.horizon();
    if window == 0 || horizon % window != 0 {
        return Err(EstimatorError::WindowHorizon { window, horizon });
    }
    let d = spec.param_dim();
    let mut lhs = F::zero();
    let mut total = vec![F::zero(); d];
    for block in 0..horizon / window {
        let mut block_sum = vec![F::zero(); d];
        for t in block * window + 1..=(block + 1) * window {
            add_assign(&mut block_sum, &spec.g_total(t));
        }
        lhs += norm_sq(&block_sum);
        add_assign(&mut total, &block_sum);
    }
    let d_f = F::from_count(d);
    let rhs = (d_f + F::one()) / (d_f + F::two()) * norm_sq(&total);
    Ok(ConditionReport {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Monte-Carlo total variance of the pool-mean gradient at a frozen θ.
///
/// Each of the `samples` draws builds a fresh pool of `workers` workers
/// on its own RNG stream block (so samples are independent and the
/// worker warmup re-randomizes every window start), runs one pooled
/// estimate, and discards the pool. Holding θ fixed removes hysteresis:
/// the measurement is of the estimator alone, not of a moving target.
/// The trace uses the unbiased (M−1) sample covariance; its standard
/// error comes from 20 index-contiguous batches.
pub fn mc_total_variance<F, G>(
    config: &EstimatorConfig<F>,
    workers: usize,
    graph: &G,
    theta: &ParamVector<F>,
    samples: usize,
    master_seed: u64,
) -> Result<VarianceReport<F>, VarianceError>
where
    F: Scalar,
    G: UnrolledGraph<F>,
{
    if samples < MIN_MC_SAMPLES {
        return Err(VarianceError::TooFewSamples {
            got: samples,
            min: MIN_MC_SAMPLES,
        });
    }
    let results: Vec<Result<Vec<F>, EstimatorError>> = (0..samples)
        .into_par_iter()
        .map(|index| {
            let mut pool = build_pool(
                config,
                workers,
                graph,
                theta,
                master_seed,
                sample_stream_base(index),
            )?;
            Ok(pool_gradient(&mut pool, graph, theta)?.mean_grad)
        })
        .collect();
    let mut grads = Vec::with_capacity(samples);
    for (index, result) in results.into_iter().enumerate() {
        grads.push(result.map_err(|source| VarianceError::Sample { index, source })?);
    }

    let d = theta.dim();
    let mut mc_mean = vec![F::zero(); d];
    for grad in &grads {
        add_assign(&mut mc_mean, grad);
    }
    let inv_m = F::one() / F::from_count(samples);
    mc_mean.iter_mut().for_each(|v| *v *= inv_m);

    let mc_total_variance = trace_estimate(&grads, &mc_mean);
    let stderr = batch_stderr(&grads);

    Ok(VarianceReport {
        kind: config.kind,
        window: config.window,
        noise_period: config.noise_period,
        workers,
        samples,
        closed_form: None,
        mc_total_variance,
        stderr,
        mc_mean,
    })
}

/// Unbiased covariance-trace estimate around the supplied mean.
fn trace_estimate<F: Scalar>(grads: &[Vec<F>], mean: &[F]) -> F {
    let m = grads.len();
    let mut sum = F::zero();
    for grad in grads {
        sum += diff_norm_sq(grad, mean);
    }
    sum / F::from_count(m - 1)
}

/// Standard error of the trace from per-batch trace estimates over
/// near-equal contiguous batches.
fn batch_stderr<F: Scalar>(grads: &[Vec<F>]) -> F {
    let d = grads[0].len();
    let batches = SE_BATCHES;
    let base = grads.len() / batches;
    let extra = grads.len() % batches;
    let mut traces = Vec::with_capacity(batches);
    let mut offset = 0;
    for b in 0..batches {
        let len = base + usize::from(b < extra);
        let chunk = &grads[offset..offset + len];
        offset += len;
        let mut mean = vec![F::zero(); d];
        for grad in chunk {
            add_assign(&mut mean, grad);
        }
        let inv = F::one() / F::from_count(chunk.len());
        mean.iter_mut().for_each(|v| *v *= inv);
        traces.push(trace_estimate(chunk, &mean));
    }
    let b_f = F::from_count(batches);
    let mean: F = traces.iter().copied().sum::<F>() / b_f;
    let var: F = traces
        .iter()
        .map(|&t| (t - mean) * (t - mean))
        .sum::<F>()
        / F::from_count(batches - 1);
    (var / b_f).sqrt()
}

/// Monte-Carlo check of the Gaussian fourth moment the variance closed
/// forms rest on: for ε ~ N(0, σ²I_d), E[εεᵀεεᵀ] = (d+2)σ⁴I. Returns
/// the largest absolute entrywise deviation of the sample moment from
/// that matrix; a healthy generator keeps it near zero.
pub fn fourth_moment_check<F: Scalar>(
    noise: &NoiseConfig<F>,
    samples: usize,
    master_seed: u64,
) -> Result<F, VarianceError> {
    if samples < MIN_FOURTH_MOMENT_SAMPLES {
        return Err(VarianceError::TooFewSamples {
            got: samples,
            min: MIN_FOURTH_MOMENT_SAMPLES,
        });
    }
    let d = noise.param_dim();
    let mut rng = substream(master_seed, 0);
    // εεᵀεεᵀ = ‖ε‖²·εεᵀ, so one pass accumulates the full matrix.
    let mut moment = vec![F::zero(); d * d];
    for _ in 0..samples {
        let eps = noise.sample(&mut rng);
        let sq = norm_sq(&eps);
        for i in 0..d {
            for j in 0..d {
                moment[i * d + j] += sq * eps[i] * eps[j];
            }
        }
    }
    let inv_m = F::one() / F::from_count(samples);
    let sigma = noise.sigma();
    let diag = (F::from_count(d) + F::two()) * sigma.powi(4);
    let mut max_dev = F::zero();
    for i in 0..d {
        for j in 0..d {
            let expected = if i == j { diag } else { F::zero() };
            let dev = (moment[i * d + j] * inv_m - expected).abs();
            max_dev = max_dev.max(dev);
        }
    }
    Ok(max_dev)
}
