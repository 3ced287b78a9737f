//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative numerical method failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// An integral or moment is divergent for the requested parameters.
    #[error("divergent quantity: {0}")]
    Divergent(String),

    /// Configuration file or flag error.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
