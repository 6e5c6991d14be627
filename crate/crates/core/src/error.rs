//! Error type shared across the crate.

use crate::report::TrainReport;
use thiserror::Error;

/// Errors produced by graph construction, model math, scheduling and training.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, out of range, or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A graph or file violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A file could not be parsed; the message carries line/column context.
    #[error("parse error: {0}")]
    Parse(String),

    /// Matrix dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input data is unusable (NaN losses, non-finite values).
    #[error("data error: {0}")]
    Data(String),

    /// An API contract was violated by the caller (stale trace, empty input).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An index does not address a valid element.
    #[error("index {index} out of range for {what} of length {len}")]
    Index {
        index: usize,
        len: usize,
        what: &'static str,
    },

    /// Training produced non-finite values. Carries the rows recorded so far.
    #[error("training diverged at epoch {epoch} (learning rate {learning_rate}): {reason}")]
    Diverged {
        epoch: usize,
        learning_rate: f64,
        reason: String,
        partial: Box<TrainReport>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wraps a serde_json error, keeping its line/column text.
    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
