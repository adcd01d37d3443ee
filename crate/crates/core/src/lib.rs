//! Gradient estimation for unrolled computation graphs by antithetic
//! evolution strategies.
//!
//! A computation graph here is a dynamical system `s_t = f_t(s_{t−1}; θ)`
//! run for `T` steps from `s0`, each step emitting a loss; the objective
//! is the episode-mean loss as a function of the shared parameters θ.
//! The crate provides:
//!
//! * [`graph`]: the [`graph::UnrolledGraph`] abstraction plus unrolling
//!   and episode-loss helpers;
//! * [`lorenz`]: a Lorenz-system parameter-learning benchmark whose
//!   chaotic loss surface defeats naive truncated gradients;
//! * [`linear`]: loss specifications that are exactly linear in every
//!   applied θ, the regime where estimator means and variances have
//!   closed forms;
//! * [`estimators`]: the antithetic evolution-strategies estimator
//!   family and the step-unlocked worker pool;
//! * [`optim`] / [`train`]: SGD/Adam and the pooled training loop;
//! * [`variance`]: closed-form and Monte-Carlo total-variance tooling;
//! * [`rng`]: seeded, collision-free substream derivation for all of
//!   the above.
//!
//! Everything numerical is generic over [`scalar::Scalar`] (implemented
//! for `f32` and `f64`); the `*64` aliases below fix the default
//! double-precision choice used by the command-line tools.

pub mod estimators;
pub mod graph;
pub mod linear;
pub mod lorenz;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod train;
pub mod variance;

pub use estimators::{
    fulles_estimate, fulles_estimate_with_noise, make_step_unlocked_pool, mod_dagger,
    pool_gradient, EsWorker, EstimatorConfig, EstimatorError, EstimatorKind, FullEsWorker,
    GpesWorker, GradientSample, NoiseConfig, NresWorker, PesWorker, PoolStep, TesWorker,
    TruncationClock, WorkerPool,
};
pub use graph::{
    episode_mean_loss, episode_mean_loss_from, unroll_step, GraphError, ParamVector,
    UnrolledGraph,
};
pub use linear::{LinearGraph, LinearLossSpec, LinearSpecError};
pub use lorenz::{
    lorenz_test_loss, lorenz_test_loss_with_std, lorenz_theta_gt, lorenz_theta_init, LorenzGraph,
    LORENZ_DT, LORENZ_GROUND_TRUTH_RA, LORENZ_S0, LORENZ_TEST_INIT_STD,
};
pub use optim::{LrSchedule, OptimError, Optimizer, OptimizerKind};
pub use rng::{sample_stream_base, substream, EVAL_STREAM};
pub use scalar::Scalar;
pub use train::{train, TrainError, TrainLog, TrainOptions, TrainRecord};
pub use variance::{
    closed_form_fulles_variance, closed_form_gpes_variance, fourth_moment_check,
    mc_total_variance, window_sum_condition, ConditionReport, VarianceError, VarianceReport,
    MIN_FOURTH_MOMENT_SAMPLES, MIN_MC_SAMPLES,
};

/// Default scalar type for the command-line tools and tests.
pub type Real = f64;

pub type ParamVector64 = graph::ParamVector<Real>;
pub type LinearLossSpec64 = linear::LinearLossSpec<Real>;
pub type LinearGraph64 = linear::LinearGraph<Real>;
pub type LorenzGraph64 = lorenz::LorenzGraph<Real>;
pub type EstimatorConfig64 = estimators::EstimatorConfig<Real>;
pub type EsWorker64 = estimators::EsWorker<Real>;
pub type WorkerPool64 = estimators::pool::WorkerPool<Real>;
pub type Optimizer64 = optim::Optimizer<Real>;
pub type LrSchedule64 = optim::LrSchedule<Real>;
