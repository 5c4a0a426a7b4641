//! One error type for the whole library.
//!
//! Variants are grouped by what went wrong rather than by module, so callers
//! (and the CLI exit-code mapping) can match on kind without caring which
//! layer raised it.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// An input value is outside the mathematical domain of the operation
    /// (log of a non-positive number, division by zero, ...).
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// An index (token id, axis, gather row) is out of range.
    #[error("{op}: index {index} out of range for size {size}")]
    Index {
        op: &'static str,
        index: usize,
        size: usize,
    },

    /// An API precondition was violated (backward on a non-scalar, empty
    /// sentence, fully masked attention row, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value or file is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Input data is unusable (empty corpus, empty metric inputs, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Power iteration cannot proceed (zero matrix).
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),

    /// Training produced a non-finite gradient or loss.
    #[error("training diverged: {0}")]
    Divergence(String),

    /// A checkpoint or model file failed an integrity check.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
