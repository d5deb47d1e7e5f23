use thiserror::Error;

pub type Result<T> = std::result::Result<T, DepError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid bandwidth {0}: must be finite and > 0")]
    InvalidBandwidth(f64),

    #[error("insufficient sample: need n >= {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate null distribution: mean {mean}, variance {variance}")]
    DegenerateNull { mean: f64, variance: f64 },

    #[error("quadrature oracle failed: {0}")]
    OracleFailure(String),
}

impl DepError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DepError::InvalidInput(msg.into())
    }
}
