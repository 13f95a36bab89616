use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("not invertible by this criterion: {0}")]
    NotInvertible(String),
    #[error("insufficient window: {0}")]
    InsufficientWindow(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("divergence at step {step}: {detail}")]
    Divergence { step: usize, detail: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("not bounded: {0}")]
    NotBounded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
