//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A text-format parse failure. `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input is in a format we deliberately do not read (e.g. binary PLY).
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector or tensor dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Conditioning label outside the embedding table.
    #[error("unknown class id {id} (model has {total} labels)")]
    UnknownClass { id: usize, total: usize },

    /// An operation that requires a non-empty input got an empty one.
    #[error("empty {0}")]
    Empty(&'static str),

    /// Training produced a non-finite loss.
    #[error("non-finite loss {loss} at training step {step}")]
    NonFiniteLoss { step: usize, loss: f64 },

    /// Checkpoint file does not start with the expected magic bytes.
    #[error("checkpoint has bad magic bytes")]
    BadMagic,

    /// Checkpoint was written by an incompatible format version.
    #[error("checkpoint version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u16, expected: u16 },

    /// Checkpoint ended before the named tensor was fully read.
    #[error("checkpoint truncated while reading tensor `{tensor}`")]
    Truncated { tensor: String },

    /// Checkpoint header declares inconsistent or out-of-range dimensions.
    #[error("checkpoint dimension error: {0}")]
    BadDimensions(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
