use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("row {row}: {msg}")]
    InvalidRow { row: usize, msg: String },

    #[error("{}level {level} of factor z{factor} outside 1..={max}", row_prefix(*.row))]
    LevelOutOfRange {
        row: Option<usize>,
        factor: usize,
        level: usize,
        max: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix not positive definite even with nugget {cap:e}")]
    NotPositiveDefinite { cap: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("empty key subset for n_s = {n_s} at level combination {levels:?}")]
    EmptyKeySubset { n_s: usize, levels: Vec<usize> },

    #[error("no admissible n_s: {0}")]
    NoAdmissibleNs(String),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn row_prefix(row: Option<usize>) -> String {
    row.map(|r| format!("row {r}: ")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, Error>;
