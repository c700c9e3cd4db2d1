use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BrnesError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("logic error: {0}")]
    Logic(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, BrnesError>;

pub(crate) fn config_err(msg: impl Into<String>) -> BrnesError {
    BrnesError::Config(msg.into())
}
