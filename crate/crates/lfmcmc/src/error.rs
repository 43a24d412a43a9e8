use nalgebra::DMatrix;
use thiserror::Error;

/// Errors reported by configuration and sampling entry points.
///
/// Contract violations inside hot loops (negative distances, non-finite
/// chain weights) panic instead; they indicate bugs, not bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(
        "estimated covariance is numerically singular (condition number {condition:.3e} > {limit:.1e}); \
         fall back to the scaled_euclidean metric"
    )]
    SingularCovariance {
        condition: f64,
        limit: f64,
        /// The offending estimate, so callers can still read its diagonal.
        covariance: Box<DMatrix<f64>>,
    },

    #[error(
        "chain initialization failed after {attempts} attempts: no starting state with non-zero weight; \
         widen the tolerance, use a self_scaling schedule, or raise the attempt budget"
    )]
    InitializationFailed { attempts: usize },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("unknown {what} {name:?} (expected one of {expected})")]
    UnknownName {
        what: &'static str,
        name: String,
        expected: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
