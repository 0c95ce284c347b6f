use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the unmixing toolkit.
#[derive(Debug, Error)]
pub enum UnmixError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("feasibility violated in {context}: {detail}")]
    Infeasible { context: &'static str, detail: String },

    #[error("ill-conditioned system (condition estimate {condition:.3e}): {context}")]
    IllConditioned { context: &'static str, condition: f64 },

    #[error("numerical failure at outer iteration {iteration} in the {block}")]
    NumericalFailure { iteration: usize, block: &'static str },

    #[error("degenerate endmember: zero vector has no spectral angle")]
    DegenerateEndmember,

    #[error("rejection sampling exceeded {attempts} attempts at pixel {pixel}")]
    RejectionLimit { pixel: usize, attempts: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing required file {0}")]
    MissingFile(PathBuf),

    #[error("{0} required")]
    Required(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl UnmixError {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        UnmixError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// Process exit status used by the command-line front end: 2 for invalid
    /// input, 3 for I/O failures, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            UnmixError::Io { .. } | UnmixError::MissingFile(_) => 3,
            UnmixError::NumericalFailure { .. } | UnmixError::IllConditioned { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UnmixError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = UnmixError> = std::result::Result<T, E>;
