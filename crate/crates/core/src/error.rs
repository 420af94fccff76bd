use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the statistical kernels, the propensity model, the
/// matcher and the study runner.
///
/// Degenerate-input variants are recoverable: the simulator converts them
/// into a [`crate::simulator::DegenerateReason`] instead of aborting.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(String),
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate exposure: {0}")]
    DegenerateExposure(String),
    #[error("separation in propensity model: {0}")]
    Separation(String),
    #[error("invalid propensity fit: {0}")]
    InvalidFit(String),
    #[error("config error on \"{key}\": {message}")]
    Config { key: String, message: String },
    #[error("aggregation error: {0}")]
    Aggregation(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
