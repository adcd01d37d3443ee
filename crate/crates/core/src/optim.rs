//! First-order parameter updates: plain SGD and Adam, driven by a
//! piecewise-constant learning-rate schedule.

use thiserror::Error;

use crate::graph::ParamVector;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("gradient dimension {got} does not match parameter dimension {expected}")]
    Dim { expected: usize, got: usize },
    #[error("parameters became non-finite at update {update}")]
    NonFinite { update: u64 },
    #[error("invalid learning-rate schedule: {0}")]
    Schedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer `{other}` (expected sgd or adam)")),
        }
    }
}

/// Piecewise-constant learning rate keyed by the 0-based update index:
/// the pair (u, η) makes η the rate from update u onward. The first
/// piece must start at 0 and boundaries must strictly increase.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule<F: Scalar> {
    pieces: Vec<(u64, F)>,
}

impl<F: Scalar> LrSchedule<F> {
    pub fn new(pieces: Vec<(u64, F)>) -> Result<Self, OptimError> {
        if pieces.is_empty() {
            return Err(OptimError::Schedule("schedule has no pieces".into()));
        }
        if pieces[0].0 != 0 {
            return Err(OptimError::Schedule(format!(
                "first piece must start at update 0, got {}",
                pieces[0].0
            )));
        }
        for pair in pieces.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(OptimError::Schedule(format!(
                    "piece boundaries must strictly increase, got {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(at, rate) in &pieces {
            if !(rate.is_finite() && rate > F::zero()) {
                return Err(OptimError::Schedule(format!(
                    "rate at update {at} must be finite and positive"
                )));
            }
        }
        Ok(Self { pieces })
    }

    /// A single rate for the whole run. Panics on a non-positive or
    /// non-finite rate.
    pub fn constant(rate: F) -> Self {
        Self::new(vec![(0, rate)]).expect("constant schedule requires a positive finite rate")
    }

    pub fn rate_at(&self, update_index: u64) -> F {
        let mut rate = self.pieces[0].1;
        for &(at, r) in &self.pieces {
            if at <= update_index {
                rate = r;
            } else {
                break;
            }
        }
        rate
    }

    pub fn pieces(&self) -> &[(u64, F)] {
        &self.pieces
    }
}

/// Optimizer state for one parameter vector. Counts its own updates; the
/// first `update` call is index 0 for the schedule.
#[derive(Debug, Clone)]
pub struct Optimizer<F: Scalar> {
    kind: OptimizerKind,
    schedule: LrSchedule<F>,
    first_moment: Vec<F>,
    second_moment: Vec<F>,
    updates_done: u64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl<F: Scalar> Optimizer<F> {
    pub fn new(kind: OptimizerKind, schedule: LrSchedule<F>, param_dim: usize) -> Self {
        Self {
            kind,
            schedule,
            first_moment: vec![F::zero(); param_dim],
            second_moment: vec![F::zero(); param_dim],
            updates_done: 0,
        }
    }

    pub fn sgd(rate: F, param_dim: usize) -> Self {
        Self::new(OptimizerKind::Sgd, LrSchedule::constant(rate), param_dim)
    }

    pub fn adam(rate: F, param_dim: usize) -> Self {
        Self::new(OptimizerKind::Adam, LrSchedule::constant(rate), param_dim)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn updates_done(&self) -> u64 {
        self.updates_done
    }

    /// Applies one descent step in place. Errors (without touching θ) if
    /// the step would make any parameter non-finite.
    pub fn update(
        &mut self,
        theta: &mut ParamVector<F>,
        grad: &[F],
    ) -> Result<(), OptimError> {
        if grad.len() != theta.dim() {
            return Err(OptimError::Dim {
                expected: theta.dim(),
                got: grad.len(),
            });
        }
        let rate = self.schedule.rate_at(self.updates_done);
        let proposed: Vec<F> = match self.kind {
            OptimizerKind::Sgd => theta
                .values()
                .iter()
                .zip(grad)
                .map(|(&th, &g)| th - rate * g)
                .collect(),
            OptimizerKind::Adam => {
                let beta1 = F::from_f64(ADAM_BETA1).unwrap();
                let beta2 = F::from_f64(ADAM_BETA2).unwrap();
                let eps = F::from_f64(ADAM_EPS).unwrap();
                let t = (self.updates_done + 1) as i32;
                let bias1 = F::one() - beta1.powi(t);
                let bias2 = F::one() - beta2.powi(t);
                let mut proposed = Vec::with_capacity(theta.dim());
                for i in 0..theta.dim() {
                    let g = grad[i];
                    self.first_moment[i] = beta1 * self.first_moment[i] + (F::one() - beta1) * g;
                    self.second_moment[i] =
                        beta2 * self.second_moment[i] + (F::one() - beta2) * g * g;
                    let m_hat = self.first_moment[i] / bias1;
                    let v_hat = self.second_moment[i] / bias2;
                    proposed.push(theta.values()[i] - rate * m_hat / (v_hat.sqrt() + eps));
                }
                proposed
            }
        };
        if proposed.iter().any(|v| !v.is_finite()) {
            return Err(OptimError::NonFinite {
                update: self.updates_done,
            });
        }
        theta.values_mut().copy_from_slice(&proposed);
        self.updates_done += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_subtracts_the_scaled_gradient() {
        let mut theta = ParamVector::new(vec![1.0, -2.0]).unwrap();
        let mut opt = Optimizer::sgd(0.5f64, 2);
        opt.update(&mut theta, &[2.0, -4.0]).unwrap();
        assert_eq!(theta.values(), &[0.0, 0.0]);
        assert_eq!(opt.updates_done(), 1);
    }

    #[test]
    fn adam_first_step_is_a_signed_unit_step() {
        // With zeroed moments, bias correction makes m̂ = g and v̂ = g²,
        // so the first step is −η·g/(|g| + 1e-8) ≈ −η·sign(g).
        let mut theta = ParamVector::new(vec![0.0, 0.0]).unwrap();
        let mut opt = Optimizer::adam(0.1f64, 2);
        opt.update(&mut theta, &[3.0, -0.004]).unwrap();
        assert!((theta.values()[0] - (-0.1)).abs() < 1e-8);
        assert!((theta.values()[1] - 0.1).abs() < 1e-5);
    }

    #[test]
    fn schedule_switches_at_its_boundary() {
        let schedule = LrSchedule::new(vec![(0, 0.1f64), (3, 0.01)]).unwrap();
        assert_eq!(schedule.rate_at(0), 0.1);
        assert_eq!(schedule.rate_at(2), 0.1);
        assert_eq!(schedule.rate_at(3), 0.01);
        assert_eq!(schedule.rate_at(1000), 0.01);

        let mut theta = ParamVector::new(vec![0.0]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, schedule, 1);
        for _ in 0..4 {
            opt.update(&mut theta, &[1.0]).unwrap();
        }
        // Three updates at 0.1 and one at 0.01.
        assert!((theta.values()[0] - (-0.31)).abs() < 1e-12);
    }

    #[test]
    fn schedule_validation() {
        assert!(LrSchedule::<f64>::new(vec![]).is_err());
        assert!(LrSchedule::new(vec![(1, 0.1f64)]).is_err());
        assert!(LrSchedule::new(vec![(0, 0.1f64), (0, 0.2)]).is_err());
        assert!(LrSchedule::new(vec![(0, -0.1f64)]).is_err());
        assert!(LrSchedule::new(vec![(0, f64::NAN)]).is_err());
        assert!(LrSchedule::new(vec![(0, 0.1f64), (10, 0.2)]).is_ok());
    }

    #[test]
    fn non_finite_step_is_rejected_and_theta_untouched() {
        let mut theta = ParamVector::new(vec![1.0]).unwrap();
        let mut opt = Optimizer::sgd(0.5f64, 1);
        let err = opt.update(&mut theta, &[f64::NAN]).unwrap_err();
        assert_eq!(err, OptimError::NonFinite { update: 0 });
        assert_eq!(theta.values(), &[1.0]);
        assert_eq!(opt.updates_done(), 0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut theta = ParamVector::new(vec![1.0]).unwrap();
        let mut opt = Optimizer::sgd(0.5f64, 1);
        let err = opt.update(&mut theta, &[1.0, 2.0]).unwrap_err();
        assert_eq!(err, OptimError::Dim { expected: 1, got: 2 });
    }
}
