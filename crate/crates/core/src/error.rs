use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("resource guard exceeded: {0}")]
    ResourceGuard(String),

    #[error("state has zero norm and cannot be normalized")]
    ZeroNorm,

    #[error("diagonal is not symmetric about the antidiagonal (first mismatch at {index})")]
    NotAntidiagonalSymmetric { index: usize },

    #[error("norm drift {drift:e} at step {step} exceeds the abort threshold")]
    NormDrift { step: usize, drift: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn guard(msg: impl Into<String>) -> Self {
        Error::ResourceGuard(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
