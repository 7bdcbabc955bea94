use thiserror::Error;

pub type Result<T> = std::result::Result<T, KcmError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KcmError {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state {0} is not part of the basis")]
    StateNotInBasis(String),
    #[error("prime-field results disagree: {0:?}")]
    PrimeDisagreement(Vec<(u64, String)>),
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl KcmError {
    /// Internal consistency failures, as opposed to bad input.
    pub fn is_cross_check(&self) -> bool {
        matches!(self, KcmError::CrossCheck(_) | KcmError::PrimeDisagreement(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            KcmError::Capacity(_) => "capacity",
            KcmError::Domain(_) => "domain",
            KcmError::GeometryMismatch(_) => "geometry_mismatch",
            KcmError::Unsupported(_) => "unsupported",
            KcmError::DimensionMismatch { .. } => "dimension_mismatch",
            KcmError::StateNotInBasis(_) => "state_not_in_basis",
            KcmError::PrimeDisagreement(_) => "prime_disagreement",
            KcmError::CrossCheck(_) => "cross_check",
            KcmError::Budget(_) => "budget",
            KcmError::Parse(_) => "parse",
        }
    }
}
