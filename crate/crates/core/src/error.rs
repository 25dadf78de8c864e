use thiserror::Error;

/// Errors produced by the interaction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a table contract (non-finite values, bad lengths).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Two operands disagree on the number of variables or vector length.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// The requested size exceeds a hard capacity limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A numerical routine failed (factorization, non-finite gradient, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A checked mathematical invariant did not hold.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    /// A caller broke an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("incomplete table: mask {mask} is missing")]
    MissingMask { mask: usize },

    #[error("duplicate mask {mask} at line {line}")]
    DuplicateMask { mask: usize, line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dimension(expected: usize, actual: usize) -> Self {
        Error::Dimension { expected, actual }
    }
}
