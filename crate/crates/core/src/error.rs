use thiserror::Error;

/// Errors produced by the metric, reward and training routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HvoError {
    #[error("empty score vector")]
    EmptyScoreVector,
    #[error("std undefined for fewer than 2 values (got {0})")]
    StdUndefined(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid reference point: {0}")]
    InvalidReferencePoint(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty group")]
    EmptyGroup,
    #[error("group too small: need at least {min}, got {actual}")]
    GroupTooSmall { min: usize, actual: usize },
    #[error("empty output")]
    EmptyOutput,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("token {token} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, HvoError>;
