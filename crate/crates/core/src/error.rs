use thiserror::Error;

/// Errors produced by the field, tail, simulation and scan routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("non-finite integrand value {value} at sphere point {point:?}")]
    NonFinite { value: f64, point: Vec<f64> },

    #[error("series did not converge: {0}")]
    Convergence(String),

    #[error("degenerate table: {margin} marginal {index} is zero")]
    DegenerateTable { margin: Margin, index: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Which marginal of a contingency table vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Margin {
    Row,
    Column,
}

impl std::fmt::Display for Margin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Margin::Row => f.write_str("row"),
            Margin::Column => f.write_str("column"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
