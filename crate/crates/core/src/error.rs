use std::path::PathBuf;

use crate::config::Violation;

/// Errors produced by the simulation and analysis layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite state at t = {t} s")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t} s (h = {h:e} s); problem is stiff or tolerance too tight")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t} s")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("time grid is not uniform at sample {index}")]
    NonUniformGrid { index: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("half maximum not bracketed around {freq_hz} Hz")]
    HalfMaxNotBracketed { freq_hz: f64 },

    #[error("sideband truncation too severe: 1 - sum(J_k^2) = {deficit:e}")]
    Truncation { deficit: f64 },

    #[error("aliasing: sample rate {sample_rate} Hz does not resolve {highest} Hz")]
    Aliasing { sample_rate: f64, highest: f64 },

    #[error("fit initialization failed: {0}")]
    FitInit(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::StepUnderflow { .. } | Error::TooManySteps { .. }
        )
    }
}
