//! Truncated antithetic estimator with a tunable noise-sharing period K:
//! a fresh ε is drawn whenever the window start is a multiple of K and
//! reused for the K following steps, while ξ accumulates every draw so
//! the estimate stays unbiased. K = W reduces to drawing each window
//! (the accumulated-noise estimator) and K = T to one draw per episode
//! (the noise-reuse estimator); both reductions are bit-exact because
//! they share this code path's arithmetic. Costs 2W steps per estimate.

use rand_chacha::ChaCha8Rng;

use super::{scaled_noise, EstimatorError, GradientSample, OnlineCore};
use crate::graph::{ParamVector, UnrolledGraph};
use crate::scalar::{add_assign, Scalar};

#[derive(Debug, Clone)]
pub struct GpesWorker<F: Scalar> {
    core: OnlineCore<F>,
    noise_period: usize,
    /// Sum of every ε drawn since the episode start.
    xi: Vec<F>,
}

impl<F: Scalar> GpesWorker<F> {
    pub fn new<G: UnrolledGraph<F>>(
        graph: &G,
        sigma: F,
        window: usize,
        noise_period: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self, EstimatorError> {
        let core = OnlineCore::new(graph, sigma, window, rng)?;
        let horizon = core.clock.horizon();
        if noise_period % window != 0 || noise_period < window || noise_period > horizon {
            return Err(EstimatorError::NoisePeriod {
                period: noise_period,
                window,
                horizon,
            });
        }
        let xi = vec![F::zero(); core.noise.param_dim()];
        Ok(Self {
            core,
            noise_period,
            xi,
        })
    }

    pub fn gradient_estimate<G: UnrolledGraph<F>>(
        &mut self,
        graph: &G,
        theta: &ParamVector<F>,
    ) -> Result<GradientSample<F>, EstimatorError> {
        self.core.ensure_ready(graph, theta)?;
        let tau = self.core.clock.tau();
        let window = self.core.clock.window();

        if tau % self.noise_period == 0 {
            self.core.draw_noise();
            add_assign(&mut self.xi, &self.core.eps);
        }
        self.core.set_perturbed(theta);
        let (loss_plus, loss_minus) = self.core.antithetic_span(graph, tau, window)?;
        let grad = scaled_noise(loss_plus, loss_minus, self.core.noise.sigma(), window, &self.xi);

        if self.core.clock.advance() {
            self.core.reset_states();
            self.xi.iter_mut().for_each(|v| *v = F::zero());
        }
        Ok(GradientSample {
            grad,
            window_start: tau,
            unroll_steps_consumed: 2 * window,
        })
    }

    pub fn noise_period(&self) -> usize {
        self.noise_period
    }

    pub fn window_start(&self) -> usize {
        self.core.clock.tau()
    }

    pub fn is_poisoned(&self) -> bool {
        self.core.poisoned
    }

    pub fn reset(&mut self) {
        self.core.reset();
        self.xi.iter_mut().for_each(|v| *v = F::zero());
    }

    #[cfg(test)]
    pub(crate) fn current_noise(&self) -> &[F] {
        &self.core.eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{LinearGraph, LinearLossSpec};
    use crate::rng::substream;

    #[test]
    fn noise_period_validation() {
        let graph = LinearGraph::new(LinearLossSpec::random(12, 2, 31));
        let ok = |k| GpesWorker::new(&graph, 0.1, 3, k, substream(1, 0)).is_ok();
        assert!(ok(3));
        assert!(ok(6));
        assert!(ok(12));
        assert!(!ok(2)); // below the window
        assert!(!ok(4)); // not a multiple of the window
        assert!(!ok(24)); // beyond the horizon
    }

    #[test]
    fn noise_refreshes_exactly_every_period() {
        let graph = LinearGraph::new(LinearLossSpec::random(12, 2, 31));
        let theta = ParamVector::zeros(2);
        let mut worker = GpesWorker::new(&graph, 0.1, 3, 6, substream(2, 0)).unwrap();
        let mut noises = Vec::new();
        for _ in 0..4 {
            worker.gradient_estimate(&graph, &theta).unwrap();
            noises.push(worker.current_noise().to_vec());
        }
        // Windows start at τ = 0, 3, 6, 9; with K = 6 draws happen at 0
        // and 6 only.
        assert_eq!(noises[0], noises[1]);
        assert_ne!(noises[1], noises[2]);
        assert_eq!(noises[2], noises[3]);
    }
}
