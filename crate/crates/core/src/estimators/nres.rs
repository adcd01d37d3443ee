//! Truncated antithetic estimator with one noise draw per episode: ε is
//! sampled at τ = 0 and reused for every window until the episode ends.
//! Because all applied perturbations equal ε, the accumulated noise is
//! just ε itself, and no separate accumulator is needed. Unbiased; 2W
//! steps per estimate.

use rand_chacha::ChaCha8Rng;

use super::{scaled_noise, EstimatorError, GradientSample, OnlineCore};
use crate::graph::{ParamVector, UnrolledGraph};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct NresWorker<F: Scalar> {
    core: OnlineCore<F>,
}

impl<F: Scalar> NresWorker<F> {
    pub fn new<G: UnrolledGraph<F>>(
        graph: &G,
        sigma: F,
        window: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self, EstimatorError> {
        Ok(Self {
            core: OnlineCore::new(graph, sigma, window, rng)?,
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

        if tau == 0 {
            self.core.draw_noise();
        }
        self.core.set_perturbed(theta);
        let (loss_plus, loss_minus) = self.core.antithetic_span(graph, tau, window)?;
        let grad = scaled_noise(
            loss_plus,
            loss_minus,
            self.core.noise.sigma(),
            window,
            &self.core.eps,
        );

        if self.core.clock.advance() {
            self.core.reset_states();
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
    }

    #[cfg(test)]
    pub(crate) fn current_noise(&self) -> &[F] {
        &self.core.eps
    }
}
