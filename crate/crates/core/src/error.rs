use std::io;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A continuous observation fell outside the quantizer range.
    #[error("observation {value} outside quantizer range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    /// Sample buffers do not match the expected slot framing.
    #[error("framing error: expected {expected} samples, got {actual}")]
    Framing { expected: usize, actual: usize },

    /// Matrix or vector dimensions are inconsistent.
    #[error("shape error: {0}")]
    Shape(String),

    /// Tallies with different bits-per-symbol cannot be merged.
    #[error("cannot merge tallies with {0} and {1} bits per symbol")]
    Aggregation(u32, u32),

    /// Invalid sweep or run configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
            || matches!(self, Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
