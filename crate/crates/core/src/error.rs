use thiserror::Error;

use crate::solver::TraceRecord;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The optimizer produced a non-finite objective at an accepted iterate.
    #[error("solver diverged after {} recorded iterations: {reason}", trace.len())]
    Divergence {
        reason: String,
        trace: Vec<TraceRecord>,
    },

    /// A graph measure is not defined for the given graph (e.g. too few edges).
    #[error("measure undefined: {0}")]
    UndefinedMeasure(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
