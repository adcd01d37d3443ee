//! Truncated antithetic estimator with accumulated noise: unbiased at any
//! window length W because the perturbations applied since the episode
//! start are summed into ξ and the loss difference is projected onto ξ
//! rather than onto the latest draw alone. Costs 2W steps per estimate.

use rand_chacha::ChaCha8Rng;

use super::{scaled_noise, EstimatorError, GradientSample, OnlineCore};
use crate::graph::{ParamVector, UnrolledGraph};
use crate::scalar::{add_assign, Scalar};

#[derive(Debug, Clone)]
pub struct PesWorker<F: Scalar> {
    core: OnlineCore<F>,
    /// Sum of every ε drawn since the episode start, including the one in
    /// force for the current window.
    xi: Vec<F>,
}

impl<F: Scalar> PesWorker<F> {
    pub fn new<G: UnrolledGraph<F>>(
        graph: &G,
        sigma: F,
        window: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self, EstimatorError> {
        let core = OnlineCore::new(graph, sigma, window, rng)?;
        let xi = vec![F::zero(); core.noise.param_dim()];
        Ok(Self { core, xi })
    }

    pub fn gradient_estimate<G: UnrolledGraph<F>>(
        &mut self,
        graph: &G,
        theta: &ParamVector<F>,
    ) -> Result<GradientSample<F>, EstimatorError> {
        self.core.ensure_ready(graph, theta)?;
        let tau = self.core.clock.tau();
        let window = self.core.clock.window();

        self.core.draw_noise();
        add_assign(&mut self.xi, &self.core.eps);
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
    pub(crate) fn accumulated_noise(&self) -> &[F] {
        &self.xi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{LinearGraph, LinearLossSpec};
    use crate::rng::substream;

    fn graph() -> LinearGraph<f64> {
        LinearGraph::new(LinearLossSpec::random(6, 2, 11))
    }

    #[test]
    fn xi_accumulates_within_an_episode_and_clears_at_the_end() {
        let graph = graph();
        let theta = ParamVector::zeros(2);
        let mut worker = PesWorker::new(&graph, 0.1, 2, substream(3, 0)).unwrap();
        let mut last_norm = 0.0f64;
        for call in 0..3 {
            assert_eq!(worker.window_start(), 2 * call);
            worker.gradient_estimate(&graph, &theta).unwrap();
            let norm: f64 = worker
                .accumulated_noise()
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if call < 2 {
                assert!(norm > 0.0);
                assert_ne!(norm, last_norm);
                last_norm = norm;
            } else {
                // Episode ended: ξ cleared for the next one.
                assert_eq!(norm, 0.0);
                assert_eq!(worker.window_start(), 0);
            }
        }
    }

    #[test]
    fn reset_clears_position_but_not_the_rng_stream() {
        let graph = graph();
        let theta = ParamVector::zeros(2);
        let mut a = PesWorker::new(&graph, 0.1, 2, substream(3, 0)).unwrap();
        let mut b = PesWorker::new(&graph, 0.1, 2, substream(3, 0)).unwrap();
        a.gradient_estimate(&graph, &theta).unwrap();
        b.gradient_estimate(&graph, &theta).unwrap();
        a.reset();
        // The reset worker restarts its episode, but keeps consuming fresh
        // noise: its next estimate differs from its own first one.
        let after_reset = a.gradient_estimate(&graph, &theta).unwrap();
        let second = b.gradient_estimate(&graph, &theta).unwrap();
        assert_eq!(after_reset.window_start, 0);
        assert_eq!(second.window_start, 2);
        assert_ne!(after_reset.grad, second.grad);
    }
}
