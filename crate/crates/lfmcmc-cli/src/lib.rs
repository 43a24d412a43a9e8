//! Experiment harness for the lfmcmc toolkit.
//!
//! Parses flat TOML experiment configs, runs the configured sampler over
//! replicate chains, and reproduces the built-in figure experiment suites
//! as tidy CSV datasets. The `lfmcmc` binary is a thin wrapper over
//! [`runner`] and [`figures`].

pub mod config;
pub mod figures;
pub mod output;
pub mod runner;

use thiserror::Error;

/// Harness errors, split by exit code: configuration problems exit 1,
/// runtime failures exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<lfmcmc::Error> for CliError {
    fn from(err: lfmcmc::Error) -> Self {
        use lfmcmc::Error as E;
        match &err {
            E::Config(_) | E::DimensionMismatch(_) | E::NonFinite(_) | E::UnknownName { .. } => {
                CliError::Config(err.to_string())
            }
            E::SingularCovariance { .. } | E::InitializationFailed { .. } | E::EmptySample(_) => {
                CliError::Runtime(err.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
