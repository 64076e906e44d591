use std::io;

use thiserror::Error;

/// Errors produced by the mesh, sampling, training and serialization code.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violates a precondition (index range, shape, channel count).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A tensor operation received operands of incompatible shapes.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// A model or sampling configuration cannot be realized.
    #[error("configuration error: {0}")]
    Config(String),

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A binary file is truncated or carries the wrong magic/version.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    /// A latent code or checkpoint was produced for a different hierarchy.
    #[error("hierarchy fingerprint mismatch: expected {expected:016x}, found {found:016x}")]
    FingerprintMismatch { expected: u64, found: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}
