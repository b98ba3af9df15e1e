use thiserror::Error;

use crate::optim::OptimTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function (non-finite,
    /// non-positive scale, empty input, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition on the structure of the input was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("optimizer failed: {reason}")]
    Optim {
        reason: String,
        trace: Box<OptimTrace>,
    },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
