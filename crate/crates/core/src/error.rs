use thiserror::Error;

/// Errors raised by model construction, estimation and variance evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point on or too close to a simplex vertex: {0}")]
    VertexPoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {column} has no observed value")]
    EmptyColumn { column: usize },

    #[error("no fully observed row")]
    NoCompleteRows,

    #[error("invalid madogram value: nu + c(w) = {0} >= 1")]
    InvalidMadogram(f64),

    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("infeasible clustering: {0}")]
    InfeasibleClustering(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
