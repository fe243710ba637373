//! Error types shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's domain (out of range, wrong sign,
    /// dimension mismatch, ...).
    #[error("{context}: {message}")]
    Domain {
        context: &'static str,
        message: String,
    },

    /// Fitting a scaler or recovering correction constants failed.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// A model or cluster file could not be loaded (wrong version, malformed
    /// content, or invariant violation).
    #[error("model file error: {0}")]
    ModelFile(String),

    /// A dataset or input CSV could not be parsed. Line numbers are 1-based
    /// and include the header.
    #[error("{path}:{line}: {message}")]
    CsvParse {
        path: String,
        line: usize,
        message: String,
    },

    /// Configuration rejected (unknown keys, values outside module preconditions).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Training aborted because the loss left the finite range.
    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(context: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            context,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
