use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    /// A parameter or precondition was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A negative Fourier power was requested for a field that carries mass in
    /// its zero mode, which has no representative on the torus.
    #[error("zero-frequency mode {magnitude:e} exceeds tolerance {tolerance:e}; negative powers need mean-free input")]
    ZeroMode { magnitude: f64, tolerance: f64 },

    /// The sampled function does not decay enough inside the periodic box.
    #[error("tail check failed{}: tail ratio {ratio:e} exceeds {tolerance:e}; an extent of at least {required_extent:.3} is needed", label.as_deref().map(|l| format!(" for `{l}`")).unwrap_or_default())]
    TailCheck {
        label: Option<String>,
        ratio: f64,
        tolerance: f64,
        required_extent: f64,
    },

    /// The requested dense problem is too large.
    #[error("restricted operator needs {points} masked points, bound is {bound}; use a coarser grid")]
    TooLarge { points: usize, bound: usize },

    /// An iterative method stopped without meeting its convergence test.
    #[error("no convergence after {iterations} iterations (best objective {best_value:e})")]
    NotConverged {
        iterations: usize,
        best_value: f64,
        best: Vec<f64>,
    },

    /// A numerical routine failed (singular matrix, degenerate fit, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end: 2 for
    /// validation problems, 3 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::InvalidParameter(_)
            | LabError::ZeroMode { .. }
            | LabError::TailCheck { .. }
            | LabError::TooLarge { .. }
            | LabError::Format(_)
            | LabError::Config { .. } => 2,
            LabError::NotConverged { .. } | LabError::Numerical(_) => 3,
            LabError::Io { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
