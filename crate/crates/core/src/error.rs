use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. Contract violations (shape mismatches,
/// out-of-range ids) panic instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("context cache error: {0}")]
    Cache(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 for numerical aborts, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::GradCheck(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
