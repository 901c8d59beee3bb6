use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Linear data violating the divergence compatibility condition.
    #[error("incompatible data: {0}")]
    Compatibility(String),

    /// Divergence data with a nonzero horizontal mean cannot be matched on the torus.
    #[error("gauge error: {0}")]
    Gauge(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("step failed at t = {t}: {reason}")]
    StepFailure {
        t: f64,
        reason: String,
        residuals: Vec<f64>,
    },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
