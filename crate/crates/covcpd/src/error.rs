//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the detection pipeline and its front ends.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The least-squares projection of sampled curves is rank deficient.
    #[error("ill-posed projection: {0}")]
    IllPosedProjection(String),

    /// A curve with (numerically) zero norm cannot be rescaled.
    #[error("degenerate curve at index {index}: norm {norm:e} is too small to rescale")]
    DegenerateCurve { index: usize, norm: f64 },

    /// A sequence is shorter than the configured minimum segment length.
    #[error("segment of length {len} is shorter than the minimum {min}")]
    SegmentTooShort { len: usize, min: usize },

    /// Malformed input file structure (ragged rows, bad field, ...).
    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },

    /// Non-finite or otherwise unusable data values.
    #[error("data error at ({row}, {col}): {msg}")]
    Data { row: usize, col: usize, msg: String },

    /// A numerical routine received or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The symmetric tensor basis is unusable (e.g. Gram matrix not positive definite).
    #[error("basis error: {0}")]
    Basis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
