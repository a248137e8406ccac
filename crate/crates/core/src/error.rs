use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = FspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FspError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point {point:?} lies outside the domain {lo:?}..{hi:?}")]
    OutOfDomain {
        point: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty data")]
    EmptyData,

    #[error("missing column \"{column}\" in {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("parse error at row {row}, column \"{column}\": cannot read {value:?} as a number")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("black-box query failed: {message}{}", line.as_ref().map(|l| format!(" (line: {l:?})")).unwrap_or_default())]
    Query {
        message: String,
        line: Option<String>,
    },

    #[error("protocol handshake failed at stage {stage}: {message}")]
    Handshake { stage: String, message: String },

    #[error("labeling budget exhausted: {0}")]
    Budget(String),

    #[error("rejection sampler envelope error: acceptance rate {rate:.2e} over {proposals} proposals")]
    Envelope { rate: f64, proposals: usize },

    #[error("perfect separation in density-ratio fit (coefficient norm {norm:.3e}); use larger pools")]
    Separation { norm: f64 },

    #[error("design matrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("bandwidth {h} exceeds the domain edge {edge}")]
    BandwidthConstraint { h: f64, edge: f64 },

    #[error("degenerate experiment: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
