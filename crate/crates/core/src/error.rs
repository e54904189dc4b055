use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input shape error: {0}")]
    Shape(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("exceedance level {p} needs at least {needed} samples, have {have}")]
    SampleDeficit { p: f64, needed: usize, have: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal domain mismatch: expected {expected:?}, got {got:?}")]
    DomainMismatch {
        expected: crate::signal::Domain,
        got: crate::signal::Domain,
    },

    #[error("reference oracle refuses {dim} real variables (cap is {cap})")]
    OracleTooLarge { dim: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
