use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the sampling library.
#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A particle left the finite reals during an update.
    #[error("divergence at step {step}: particle {particle} has non-finite coordinates")]
    Divergence { step: u64, particle: usize },

    #[error("state error: {0}")]
    State(String),

    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SamplerError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SamplerError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SamplerError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = SamplerError> = std::result::Result<T, E>;
