use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum KmsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("size mismatch: expected {expected} bytes of payload, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("non-finite value in payload at component {component}, node {node}")]
    NonFinite { component: usize, node: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KmsError>;

pub(crate) fn invalid(msg: impl Into<String>) -> KmsError {
    KmsError::InvalidArgument(msg.into())
}
