use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum LtError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("arity mismatch: expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("no witness available for {condition} on sequence {sequence}")]
    UnsupportedSequence { sequence: String, condition: String },

    #[error("sequence {sequence} fails {condition} at level {level}: {detail}")]
    ConditionFailed {
        sequence: String,
        condition: String,
        level: usize,
        detail: String,
    },

    #[error("involution unsupported: {0}")]
    InvolutionUnsupported(String),

    #[error("element is not self-adjoint (asymmetry {asymmetry:.3e}, allowed {allowed:.3e})")]
    NotSelfAdjoint { asymmetry: f64, allowed: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("map is not completely positive (Choi min eigenvalue {min_eig:.3e})")]
    NotCompletelyPositive { min_eig: f64 },

    #[error("empty candidate list")]
    EmptyCandidates,

    #[error("candidate {index} realizes a different element (residual {residual:.3e})")]
    RealizationMismatch { index: usize, residual: f64 },

    #[error("invalid lambda specification: {0}")]
    InvalidSpec(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LtError>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(LtError::Dimension(msg.into()))
}
