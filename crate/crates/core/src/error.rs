use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input: invalid parameters, inconsistent dimensions, malformed files.
    Config,
    /// A numerical stage failed (singular matrix, solver breakdown, LCP ray).
    Numerical,
    /// Filesystem or parse-level I/O failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("matrix `{name}` is not symmetric (relative asymmetry ‖A−Aᵀ‖_F/‖A‖_F = {defect:.3e})")]
    NotSymmetric { name: String, defect: f64 },

    #[error("matrix `{name}` is not positive definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { name: String, min_eigenvalue: f64 },

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("rank {requested} requested but data has effective rank {effective}")]
    RankExceeded { requested: usize, effective: usize },

    #[error("snapshot mismatch: {0}")]
    SnapshotMismatch(String),

    #[error("SPD least-squares solver did not converge after {iterations} iterations (objective {objective:.6e}, Newton decrement {decrement:.3e})")]
    SolverNonConvergence {
        iterations: usize,
        objective: f64,
        decrement: f64,
    },

    #[error("infeasible equality targets: {0}")]
    InfeasibleTargets(String),

    #[error("LCP solver failed at time step {step}: {reason}")]
    Lcp { step: usize, reason: String },

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::NotSymmetric { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::SnapshotMismatch(_)
            | Error::InfeasibleTargets(_)
            | Error::RankExceeded { .. } => ErrorCategory::Config,
            Error::Singular(_) | Error::SolverNonConvergence { .. } | Error::Lcp { .. } => {
                ErrorCategory::Numerical
            }
            Error::Malformed { .. } | Error::Io { .. } | Error::Csv { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn dims(
        context: impl Into<String>,
        expected: impl ToString,
        found: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
