//! Process-level error taxonomy. Every failure maps to one of three exit
//! codes so scripts can tell a bad config (fixable before any compute)
//! from a numerical blow-up (seed or hyperparameter problem).

use std::fmt;

/// Exit code for configuration and validation failures.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical divergence during a run.
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// One message per violated constraint; the command reports all of
    /// them at once rather than stopping at the first.
    Config(Vec<String>),
    /// A run produced non-finite numbers; the message names the failing
    /// update or sample.
    Divergence(String),
    /// Everything else (I/O, internal invariants).
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
            CliError::Other(_) => 1,
        }
    }

    /// Single config violation.
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(vec![message.into()])
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(errors) => {
                writeln!(f, "configuration error ({} violated):", errors.len())?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            CliError::Divergence(msg) => write!(f, "numerical divergence: {msg}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}
