use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },

    /// One message per violated invariant.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model too large: {0}")]
    ModelTooLarge(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("master problem infeasible while event {event} is in the master set: no admissible design can island it")]
    MasterInfeasible { event: String },

    #[error("column-and-constraint generation exceeded {0} iterations")]
    IterationCap(usize),

    #[error("design infeasible in grid-tied operation: {0}")]
    DesignInfeasible(String),

    #[error("missing handle: {0}")]
    MissingHandle(String),

    #[error("design does not match scenario: {0}")]
    DesignMismatch(String),
}

impl Error {
    /// Whether the error stems from the inputs rather than from solving.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Validation(_) | Error::InvalidArgument(_) | Error::DesignMismatch(_)
        )
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(vec![msg.into()])
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
