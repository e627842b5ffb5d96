use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("state has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("chain length {l} exceeds the state-vector cap of {cap} sites")]
    CapExceeded { l: usize, cap: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("non-finite amplitude after step {step}; the propagator tolerance is too loose")]
    NonFinite { step: usize },

    #[error("precision failure at step {step}: {reason}")]
    Precision { step: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Precision { .. })
    }
}
