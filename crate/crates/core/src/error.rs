use thiserror::Error;

/// Errors raised by the numerical routines and the job front-end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index overflow: {0}")]
    IndexOverflow(String),

    #[error("negative coefficient {value} at index {index}: real m-th root is undefined")]
    NegativeCoefficient { index: u64, value: f64 },

    #[error("inadmissible parameter: {0}")]
    Inadmissible(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("diameter {diam} of K exceeds c*D = {limit}")]
    DiameterTooLarge { diam: f64, limit: f64 },

    #[error("search budget exhausted: {0}")]
    SearchBudget(String),

    #[error("support collision at indices {indices:?}")]
    SupportCollision { indices: Vec<u64> },

    #[error("evaluation budget exceeded: {0}")]
    Budget(String),

    #[error("point {0:?} lies outside the parameter box")]
    OutsideBox(Vec<f64>),

    #[error("product kind mismatch: {0}")]
    ProductKind(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
