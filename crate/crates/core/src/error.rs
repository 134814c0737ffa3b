//! Error types shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enum. Variants mirror the failure classes of the
/// public operations: bad parameters, mismatched array shapes, invalid
/// data, violated invariants, rejected time steps and unusable configs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("data error: {0}")]
    DataError(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("configuration error: {0}")]
    ConfigurationError(String),
    #[error("precondition error: {0}")]
    PreconditionError(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
