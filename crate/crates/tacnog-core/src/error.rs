use std::path::PathBuf;
use thiserror::Error;

/// Errors surfaced by the guidance toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("propagation diverged at t = {t}: non-finite state for q = ({p_x}, {p_y}, {c_0})")]
    PropagationDiverged { t: f64, p_x: f64, p_y: f64, c_0: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("time-to-go must be positive, got {0}")]
    ExpiredHorizon(f64),

    #[error("guidance policy failed at t = {t}: {message}")]
    PolicyFailure { t: f64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
