//! Truncated antithetic estimator without noise accumulation: each window
//! perturbs a saved unperturbed state, projects the loss difference onto
//! the fresh ε only, and then advances the saved state through the window
//! with the unperturbed θ. Ignoring the influence of earlier windows
//! makes it biased towards short-range dependencies, but cheap to reason
//! about. Costs 3W steps per estimate: 2W antithetic plus W to advance
//! the saved state.

use rand_chacha::ChaCha8Rng;

use super::{scaled_noise, EstimatorError, GradientSample, OnlineCore};
use crate::graph::{ParamVector, UnrolledGraph};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct TesWorker<F: Scalar> {
    core: OnlineCore<F>,
    /// The unperturbed state the next window starts from.
    state: Vec<F>,
}

impl<F: Scalar> TesWorker<F> {
    pub fn new<G: UnrolledGraph<F>>(
        graph: &G,
        sigma: F,
        window: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self, EstimatorError> {
        let core = OnlineCore::new(graph, sigma, window, rng)?;
        let state = core.s0.clone();
        Ok(Self { core, state })
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
        // Both antithetic branches restart from the saved unperturbed
        // state, so only this window's perturbation enters the losses.
        self.core.s_plus.copy_from_slice(&self.state);
        self.core.s_minus.copy_from_slice(&self.state);
        self.core.set_perturbed(theta);
        let (loss_plus, loss_minus) = self.core.antithetic_span(graph, tau, window)?;
        let grad = scaled_noise(
            loss_plus,
            loss_minus,
            self.core.noise.sigma(),
            window,
            &self.core.eps,
        );

        let mut state = std::mem::take(&mut self.state);
        let advanced = self.core.plain_span(graph, &mut state, theta, tau, window);
        self.state = state;
        advanced?;

        if self.core.clock.advance() {
            self.state.copy_from_slice(&self.core.s0);
        }
        Ok(GradientSample {
            grad,
            window_start: tau,
            unroll_steps_consumed: 3 * window,
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
        self.state.copy_from_slice(&self.core.s0);
    }

    #[cfg(test)]
    pub(crate) fn saved_state(&self) -> &[F] {
        &self.state
    }
}
