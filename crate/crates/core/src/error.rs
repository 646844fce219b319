use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator, estimators and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("integration failed at t = {t_last} (step size {step:.3e} underflowed)")]
    IntegrationFailure { t_last: f64, step: f64 },

    #[error("no resonance: omega0 = {omega0} must exceed kappa = {kappa}")]
    NoResonance { omega0: f64, kappa: f64 },

    #[error("Bloch vector of length {length} exceeds N/2 = {max}")]
    UnphysicalBloch { length: f64, max: f64 },

    #[error("envelope is empty: QFI series has no positive values")]
    EmptyEnvelope,

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
