use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the SCU tree, the environment and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (wrong action level,
    /// arity mismatch, stepping a finished episode, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A state the shields are supposed to make unreachable was reached.
    #[error("invariant failure: {0}")]
    InvariantFailure(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: {field} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        path: PathBuf,
        line: usize,
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("initial state rejected: {0}")]
    InitialState(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}
