use thiserror::Error;

use crate::frames::SpanningReport;

/// Errors raised by operator algebra, frame construction and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible operator spaces: dimension {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("length mismatch: {left} quorum elements vs {right} dual elements")]
    LengthMismatch { left: usize, right: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("entry count {got} does not match a {dim}x{dim} operator")]
    BadEntryCount { dim: usize, got: usize },

    #[error("operator is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("quorum is empty")]
    EmptyQuorum,

    #[error("quorum has no retainable element (all elements vanish)")]
    AllZeroQuorum,

    #[error("quorum is incomplete (rank {} of {}); pass the subspace flag to accept a subspace dual", .0.rank, .0.dim * .0.dim)]
    Incomplete(Box<SpanningReport>),

    #[error(
        "Gram matrix is singular or ill-conditioned (condition number {condition:.3e}); \
         the elements are (nearly) linearly dependent, try the Gram-Schmidt route which eliminates dependent elements"
    )]
    IllConditioned { condition: f64 },

    #[error("singular Weigert Gram matrix (condition number {condition:.3e}): {detail}")]
    SingularWeigert { condition: f64, detail: String },

    #[error("invalid direction set: {0}")]
    Directions(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
