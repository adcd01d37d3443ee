//! Experiment front end for `oes-core`: flat-text configs, seeded runs,
//! CSV emission. The binary (`oes`) is a thin argument parser over the
//! functions in [`commands`]; everything testable lives here.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_check_theorem2, cmd_gen_linear_spec, cmd_sweep_k, cmd_train, cmd_variance, SWEEP_SCHEMA,
    TRAIN_SCHEMA, VARIANCE_SCHEMA,
};
pub use config::{CommandKind, ExperimentConfig, GraphHandle, GraphKind, DEFAULT_TEST_SAMPLES};
pub use error::{CliError, EXIT_CONFIG, EXIT_DIVERGENCE};
