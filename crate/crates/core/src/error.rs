use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum CobraError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Leave-one-out bookkeeping no longer matches the global design.
    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CobraError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CobraError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CobraError> = std::result::Result<T, E>;
