use thiserror::Error;

/// Errors raised by the solver, the scattering operators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("representation mismatch: expected {expected}, found {found}")]
    Representation {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mass drift {drift:.3e} exceeds tolerance {tol:.3e} at t = {t}")]
    MassDrift { drift: f64, tol: f64, t: f64 },

    #[error("energy drift {drift:.3e} exceeds tolerance {tol:.3e} at t = {t}")]
    EnergyDrift { drift: f64, tol: f64, t: f64 },

    #[error("wrap-around monitor breached at t = {t}: mass fraction {fraction:.3e} outside radius L/2")]
    WrapAround { t: f64, fraction: f64 },

    #[error("fixed-point iteration failed to contract (factor {factor:.3}) after {iterations} iterations")]
    Contraction { factor: f64, iterations: usize },

    #[error("horizon too short: tail estimate {tail:.3e} exceeds tolerance {tol:.3e}")]
    Horizon { tail: f64, tol: f64 },

    #[error("profile is not Cauchy in time: tail differences are not decreasing")]
    NotCauchy,

    #[error("picture mismatch: expected {expected} picture")]
    Picture { expected: &'static str },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("schedule infeasible: {0}")]
    Schedule(String),

    #[error("missing hierarchy coefficient w_{0}")]
    MissingCoefficient(usize),

    #[error("nonpositive measurement {value} at point {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("malformed field container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
