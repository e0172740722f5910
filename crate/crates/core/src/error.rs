use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GfbmError {
    #[error("{name} = {value} is outside its domain: {reason}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("gamma function pole at argument {0}")]
    Pole(f64),

    #[error("integrand is not integrable: {0}")]
    NonIntegrable(String),

    #[error(
        "quadrature did not reach tolerance: estimate {estimate:e} > target {target:e} after {evaluations} evaluations"
    )]
    QuadratureFailure {
        estimate: f64,
        target: f64,
        evaluations: usize,
    },

    #[error("covariance factorization failed after jitter escalation up to {max_jitter:e}")]
    FactorizationFailure { max_jitter: f64 },

    #[error("truncated tail variance {tail:e} exceeds {limit:e}")]
    Truncation { tail: f64, limit: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("interpolation at t = {t} outside grid horizon {horizon}")]
    Interpolation { t: f64, horizon: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl GfbmError {
    pub(crate) fn domain(name: &'static str, value: f64, reason: impl Into<String>) -> Self {
        GfbmError::OutOfDomain {
            name,
            value,
            reason: reason.into(),
        }
    }

    /// True for errors caused by invalid user-supplied parameters rather than numerics.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            GfbmError::OutOfDomain { .. }
                | GfbmError::InvalidGrid(_)
                | GfbmError::Parse(_)
                | GfbmError::InsufficientData(_)
                | GfbmError::Interpolation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, GfbmError>;
