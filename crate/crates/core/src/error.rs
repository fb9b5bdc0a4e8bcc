use thiserror::Error;

use crate::flow::TrajectoryLog;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("malformed PGM at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite values at step {step}")]
    Diverged {
        step: usize,
        /// Records of every step completed before the failure.
        log: Box<TrajectoryLog>,
    },

    #[error("dense diagnostic refused: dimension {dim} exceeds {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format { offset, message: msg.into() }
    }
}
