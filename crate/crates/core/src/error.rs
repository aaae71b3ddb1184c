//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The environment produced a non-finite observation or reward.
    #[error("environment fault at step {step}: {msg}")]
    EnvironmentFault { step: usize, msg: String },

    /// An API contract was violated (e.g. stepping a finished episode).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training fault{}: {msg}", representative.map(|j| format!(" (representative {j})")).unwrap_or_default())]
    TrainingFault {
        representative: Option<usize>,
        msg: String,
    },

    #[error("numerical fault: {0}")]
    NumericalFault(String),

    /// An iterative solver hit its iteration cap without converging.
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
