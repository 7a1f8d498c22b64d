use thiserror::Error;

use crate::pcg::Breakdown;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch in {context}: {detail}")]
    DimensionMismatch {
        context: &'static str,
        detail: String,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("symmetric eigensolver failed for matrix of order {0}")]
    EigenSolver(usize),

    #[error("operator too large for dense assembly: {rows} rows exceeds limit {limit}")]
    TooLarge { rows: usize, limit: usize },

    #[error("boundary data does not match boundary condition in direction {axis}: {reason}")]
    BoundaryMismatch { axis: usize, reason: String },

    #[error("right-hand side is not orthogonal to the null space (component {component:e}, norm {norm:e})")]
    NotCentered { component: f64, norm: f64 },

    #[error("{0}")]
    Breakdown(Box<Breakdown>),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
