use thiserror::Error;

/// Errors produced by the segmentation toolkit.
///
/// The variants are coarse on purpose: callers (notably the CLI) map them to
/// exit codes, so what matters is whether a failure came from the machine
/// (`Io`), from the data (`Data`) or from the numerics (`Numeric`).
#[derive(Debug, Error)]
pub enum SegError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed or contract-violating input data.
    #[error("{0}")]
    Data(String),

    /// Non-finite losses, exploding gradients and the like.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl SegError {
    pub fn data(msg: impl Into<String>) -> Self {
        SegError::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        SegError::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SegError>;
