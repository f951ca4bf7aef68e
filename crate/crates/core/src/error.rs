use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
///
/// Variants are grouped by [`ErrorKind`], which the command-line front end
/// maps to a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse failure class used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Divergence { .. } | Error::Numeric(_) => ErrorKind::Numeric,
            Error::Parse { .. }
            | Error::Integrity(_)
            | Error::Contract(_)
            | Error::EmptyInput(_)
            | Error::UndefinedMetric(_)
            | Error::Io { .. }
            | Error::Json { .. } => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
