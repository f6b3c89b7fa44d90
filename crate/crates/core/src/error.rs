use thiserror::Error;

use crate::fields::Field;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} outside tabulated range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The iteration cap was reached; `last` holds the final iterate.
    #[error("no convergence after {iterations} iterations (gradient sup-norm {gradient:e})")]
    Convergence {
        iterations: usize,
        gradient: f64,
        last: Box<Field>,
    },

    #[error("potential error: {0}")]
    Potential(String),

    #[error("mesh too coarse: {0}")]
    Resolution(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
