use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("training diverged at layer {layer:?}: {message}")]
    Training { layer: Option<usize>, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("malformed {kind} data: {message}")]
    Format { kind: &'static str, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("user {0} already enrolled")]
    Conflict(String),

    #[error("user {0} not found")]
    NotFound(String),

    #[error("stale token for user {user}: token epoch {token_epoch}, record epoch {record_epoch}")]
    StaleToken {
        user: String,
        token_epoch: u32,
        record_epoch: u32,
    },

    #[error("store for user {0} is locked by another process")]
    Locked(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
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

pub type Result<T> = std::result::Result<T, Error>;
