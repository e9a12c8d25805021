use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A configuration or specification failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violated a contract (bad label, unknown group, ...).
    #[error("invalid data: {0}")]
    Data(String),

    /// A metric has no defined value on the requested subset.
    #[error("metric {metric} is undefined on {subset}: {reason}")]
    UndefinedMetric {
        metric: String,
        subset: String,
        reason: String,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user input (config, data, shapes).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Data(_)
                | Error::Shape { .. }
                | Error::Toml(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }

    /// True for errors raised because a metric could not be evaluated.
    pub fn is_metric(&self) -> bool {
        matches!(self, Error::UndefinedMetric { .. } | Error::NonFinite(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
