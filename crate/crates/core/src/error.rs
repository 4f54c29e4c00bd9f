use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("mass mismatch: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("empty measure")]
    EmptyMeasure,

    #[error("resource cap exceeded: {what} = {count} > {cap}")]
    ResourceCap {
        what: &'static str,
        count: usize,
        cap: usize,
    },

    #[error("negative density {value} at {point:?}")]
    NegativeDensity { value: f64, point: Vec<f64> },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("constants unavailable: {0}")]
    Uncertified(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
