//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by model evaluation, network construction, training and I/O.
#[derive(Debug, Error)]
pub enum HmpError {
    /// A model specification violates its constraints.
    #[error("invalid specification: {0}")]
    Spec(String),
    /// An index fell outside the admissible range.
    #[error("index out of range: {0}")]
    Index(String),
    /// Tensor or image dimensions do not fit together.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A network or training configuration is not admissible.
    #[error("configuration error: {0}")]
    Config(String),
    /// A binary or text file is malformed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    /// Every grid point was excluded by the weight guard.
    #[error("no admissible grid point: {0}")]
    EmptyGrid(String),
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl HmpError {
    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        HmpError::Spec(msg.into())
    }
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        HmpError::Shape(msg.into())
    }
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HmpError::Config(msg.into())
    }
    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        HmpError::Format { offset, message: msg.into() }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, HmpError>;
