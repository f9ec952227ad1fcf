use std::path::PathBuf;

use thiserror::Error;

use crate::calendar::Month;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is malformed, out of range, or names an unknown key.
    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    /// The configuration is well formed but inconsistent with its central-bank regime.
    #[error("regime-inconsistent configuration at `{key}`: {message}")]
    Regime { key: String, message: String },

    #[error("non-finite value in `{field}` at month {month}")]
    NonFinite { month: Month, field: String },

    #[error("run cancelled at month {0}")]
    Cancelled(Month),

    #[error("no active firms")]
    NoActiveFirms,

    #[error("series has no observation for base month {0}")]
    MissingBaseMonth(Month),

    #[error("{path}, row {row}: {message}")]
    Data {
        path: String,
        row: usize,
        message: String,
    },

    #[error("i/o failure on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Serialization(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn regime(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Regime {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
