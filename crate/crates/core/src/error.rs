use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("numerical failure at step {step} (t = {t}): {detail}")]
    Numerical { step: usize, t: f64, detail: String },

    #[error("mixture marginal is singular at t = {0} (zero variance)")]
    Singular(f64),

    #[error("trajectory diverged at step {step}: |x| = {norm:e}")]
    Divergence { step: usize, norm: f64 },

    #[error("normalization undefined: {0}")]
    UndefinedNormalization(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain { .. } | Error::Argument(_) | Error::Config { .. } => 2,
            Error::Numerical { .. }
            | Error::Singular(_)
            | Error::Divergence { .. }
            | Error::UndefinedNormalization(_) => 3,
            Error::Io { .. } | Error::Format { .. } | Error::Json { .. } => 4,
        }
    }
}
