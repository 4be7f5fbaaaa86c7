use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, QcapError>;

/// Syntax or range error in a channel-spec string, located by byte offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte offset {}", self.message, self.offset)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum QcapError {
    #[error("dimension too large: {dim} exceeds cap {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("not positive semidefinite: eigenvalue {0:e}")]
    NotPositiveSemidefinite(f64),

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("not unitary: deviation {0:e}")]
    NotUnitary(f64),

    #[error("not an isometry: deviation {0:e}")]
    NotIsometry(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A theorem or lemma precondition does not hold for the given parameters.
    #[error("parameter validity violated: {0}")]
    Validity(String),

    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
}
