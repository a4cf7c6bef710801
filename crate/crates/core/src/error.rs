use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ill-posed problem: {0}")]
    IllPosed(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver failure: {message} (relative residual {residual:.3e})")]
    SolverFailure { message: String, residual: f64 },

    #[error("stale state: {0}")]
    Consistency(String),

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// The innermost error, with iteration tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::Singular(_)
                | Error::SolverFailure { .. }
                | Error::IllPosed(_)
                | Error::Optimizer(_)
                | Error::Consistency(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
