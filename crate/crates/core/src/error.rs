use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular lower-triangular Toeplitz matrix (leading coefficient {0})")]
    Singular(f64),

    #[error("square root requires a positive leading coefficient, got {0}")]
    NonPositiveDiagonal(f64),

    #[error("invalid workload parameters: {0}")]
    InvalidWorkload(String),

    #[error("invalid participation schema: {0}")]
    InvalidSchema(String),

    #[error("coefficients are not non-negative and non-increasing (first violation at index {index})")]
    NotMonotone { index: usize },

    #[error("enumeration too large: {patterns} participation patterns exceed the limit of {limit}")]
    EnumerationTooLarge { patterns: u128, limit: u128 },

    #[error("band must have unit leading coefficient, got {0}")]
    UnnormalizedBand(f64),

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
