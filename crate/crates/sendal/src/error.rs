//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed data file; carries the 1-based line number.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

/// Checkpoint load failures, kept distinct so callers can tell a stale
/// schema apart from a corrupted file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("unsupported version: {0}")]
    VersionMismatch(String),
    #[error("unknown core kind: {0}")]
    UnknownCoreKind(String),
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("truncated file: expected {0}")]
    Truncated(String),
    #[error("malformed: {0}")]
    Malformed(String),
}
