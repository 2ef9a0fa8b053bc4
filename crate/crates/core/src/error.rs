use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FfgError {
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("recursion budget exceeded at depth {0}")]
    RecursionBudgetExceeded(usize),
    #[error("state space too large: {0} states")]
    StateSpaceTooLarge(f64),
    #[error("two cylinders share the birth time {0}")]
    TieOnBirthTimes(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("truncation too coarse: tail bound {tail:e} exceeds {tolerance} of the truncated value {value:e}")]
    TruncationTooCoarse { value: f64, tail: f64, tolerance: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("coupling hypothesis violated: {0}")]
    CouplingHypothesis(String),
}

pub type Result<T> = std::result::Result<T, FfgError>;
