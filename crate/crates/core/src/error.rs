use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("dataset is empty")]
    EmptyData,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no censoring events; use the unit censoring model instead")]
    NoCensoringEvents,

    #[error("no failure events in data")]
    NoEvents,

    #[error("did not converge after {iterations} iterations (score max-norm {score_norm:e})")]
    Convergence { iterations: usize, score_norm: f64 },

    #[error("all kernel weights below {threshold:e} at the query point")]
    Extrapolation { threshold: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("fold error: {0}")]
    Fold(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}
