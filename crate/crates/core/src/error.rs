use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("non-finite {component} value at t = {t}, grid index {index}")]
    NonFinite {
        t: f64,
        index: usize,
        component: &'static str,
    },

    #[error("field has no spectral content in the searched wave-number range")]
    NoSpectralContent,

    #[error(
        "no sign change of the most unstable growth rate on [{a_lo}, {a_hi}] \
         (rates {rate_lo:?} and {rate_hi:?})"
    )]
    NoSignChange {
        a_lo: f64,
        a_hi: f64,
        rate_lo: Option<f64>,
        rate_hi: Option<f64>,
    },

    #[error("no most unstable mode: vegetated state missing or no positive root")]
    NoUnstableMode,

    #[error("Newton solve did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("pattern with {n} pulses does not exist at a = {a}")]
    PatternDoesNotExist { a: f64, n: usize },

    #[error("Newton converged to a {found}-pulse state instead of {requested}")]
    WrongWaveNumber { requested: usize, found: usize },

    #[error("empty observation series")]
    EmptySeries,

    #[error("not enough data: need {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
