use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A utility outside [-1, 1] was offered to a history.
    #[error("utility {0} violates the bound |U| <= 1")]
    UtilityBound(f64),
    #[error("insufficient data: need at least {needed} records, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("initialization error: {0}")]
    Initialization(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("rollout {rollout} failed: {source}")]
    Rollout {
        rollout: usize,
        #[source]
        source: Box<Error>,
    },
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
