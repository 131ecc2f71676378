use thiserror::Error;

/// Errors raised anywhere in the piston laboratory.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PistonError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("entropy condition violated: shock ratio k = {k} must exceed 1")]
    Entropy { k: f64 },

    #[error("non-physical state: {0}")]
    NonPhysical(String),

    #[error("shock vanishes: R+ = {r_plus} is at or below the weak-shock limit {limit}")]
    ShockVanishes { r_plus: f64, limit: f64 },

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("root solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("time step rejected at t = {t}: {reason}")]
    TimeStep { t: f64, reason: String },

    #[error("vacuum reached at t = {t} (sound speed {c:e})")]
    Vacuum { t: f64, c: f64 },

    #[error("positivity failure in cell {cell} at t = {t}: v = {v:e}")]
    Positivity { cell: usize, t: f64, v: f64 },

    #[error("no shock detected (max density ratio {ratio:.3} below threshold {threshold})")]
    NoShock { ratio: f64, threshold: f64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PistonError {
    fn from(e: std::io::Error) -> Self {
        PistonError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PistonError>;
