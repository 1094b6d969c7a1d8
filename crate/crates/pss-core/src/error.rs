//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PssError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PssError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("dimension cap {cap} is below the largest active position {active}")]
    InvalidCap { cap: usize, active: usize },
    #[error("surrogate is not monotone at {0}")]
    SurrogateViolation(String),
    #[error("uniform ellipticity fails: r = {0}")]
    UeaViolated(f64),
    #[error("system is not positive definite (pivot {pivot} at row {row})")]
    Indefinite { row: usize, pivot: f64 },
    #[error("missing predecessor coefficient for {0}")]
    Ordering(String),
    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),
    #[error("univariate sequence too short: need degree {need}, have {have}")]
    SequenceTooShort { need: usize, have: usize },
    #[error("cost guard: {0}")]
    CostGuard(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
