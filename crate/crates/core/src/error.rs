use thiserror::Error;

/// Errors raised across the library.
///
/// The CLI maps the variants onto exit codes, so new variants need a
/// matching arm in `homsym-cli`.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Fixed-point calibration of the orientation distribution did not converge.
    #[error("calibration error: {0}")]
    Calibration(String),

    /// The fiber generator could not produce a non-overlapping packing.
    #[error("generation error: {message} (achieved volume fraction {achieved_vf:.5})")]
    Generation { message: String, achieved_vf: f64 },

    /// The iterative solver hit its iteration budget.
    #[error("solver did not converge after {iterations} iterations (last relative residual {last_residual:.3e})")]
    Solver {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    /// NaN/inf detected, singular matrix, or a zero denominator.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    /// A Monte-Carlo realization failed; the study is aborted.
    #[error("study failed at size index {size_index}, realization {realization}: {source}")]
    Study {
        size_index: usize,
        realization: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Innermost cause, looking through [`Error::Study`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Study { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
