use thiserror::Error;

/// Errors raised by the analytic routines and the simulator.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum RuinError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("net profit condition violated: c = {c} <= lambda * E[X] = {loading}")]
    NetProfitViolation { c: f64, loading: f64 },

    #[error("argument outside the domain of {function}: {reason}")]
    Domain { function: &'static str, reason: String },

    #[error("quadrature did not converge on {axis}: error {error:e} above tolerance {tolerance:e}")]
    NoConvergence {
        axis: String,
        error: f64,
        tolerance: f64,
    },

    #[error("decay hint too optimistic: tail estimate {tail:e} exceeds cutoff mass {mass:e}")]
    BadDecayHint { tail: f64, mass: f64 },

    #[error("non-finite integrand value at {at} on {axis}")]
    NonFinite { axis: String, at: f64 },

    #[error("pre-ruin density {value:e} below the negative slack -{slack:e} (n={n}, t={t}, x={x})")]
    NegativeDensity {
        value: f64,
        slack: f64,
        n: usize,
        t: f64,
        x: f64,
    },

    #[error("series truncation needs {needed} terms but the cap is {cap}")]
    TruncationLimit { needed: usize, cap: usize },

    #[error("censoring bound {bound:e} exceeds {limit:e}; increase the horizon")]
    HorizonTooShort { bound: f64, limit: f64 },

    #[error("claim table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, RuinError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> RuinError {
    RuinError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn domain(function: &'static str, reason: impl Into<String>) -> RuinError {
    RuinError::Domain {
        function,
        reason: reason.into(),
    }
}
