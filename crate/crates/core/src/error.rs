use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bundle curvature symbols cannot be multiplied together")]
    BundleProduct,

    #[error("curvature data violates the Kähler symmetries (residual {0:e})")]
    AsymmetricCurvature(f64),

    #[error("point outside chart: {0}")]
    ChartViolation(String),

    #[error("tensor power must be at least 1, got {0}")]
    InvalidPower(u32),

    #[error(
        "design matrix is rank deficient (condition {condition:e}); add more distinct p values"
    )]
    RankDeficient { condition: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
