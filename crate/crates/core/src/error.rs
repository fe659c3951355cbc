use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One broken scenario invariant, with the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioViolation {
    CacheOverflow { av: usize, mbp: usize },
    DimensionMismatch(String),
    NonPositiveResource(String),
    Negative(String),
}

impl fmt::Display for ScenarioViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioViolation::CacheOverflow { av, mbp } => write!(f, "CacheOverflow({av},{mbp})"),
            ScenarioViolation::DimensionMismatch(what) => write!(f, "DimensionMismatch: {what}"),
            ScenarioViolation::NonPositiveResource(field) => {
                write!(f, "NonPositiveResource({field})")
            }
            ScenarioViolation::Negative(field) => write!(f, "Negative({field})"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {}", join(.0))]
    InvalidScenario(Vec<ScenarioViolation>),
    #[error("noise power must be positive")]
    NonPositiveNoise,
    #[error("link rate is zero but the task has data to send")]
    ZeroRate,
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),
    #[error("epsilon must be strictly positive")]
    InvalidEpsilon,
    #[error("no AV can be served within its deadline")]
    NoFeasiblePair,
    #[error("market has no bids on one side")]
    EmptyMarket,
    #[error("expected second performance value is zero")]
    ZeroDenominator,
    #[error("bid grid is empty")]
    EmptyGrid,
    #[error("outcome is infeasible: {0}")]
    InfeasibleOutcome(String),
    #[error("instance too large for enumeration: {0} candidate pairs")]
    InstanceTooLarge(usize),
    #[error("benchmark welfare is zero")]
    ZeroBenchmark,
    #[error("at least {min} trials required, got {got}")]
    InsufficientTrials { min: usize, got: usize },
    #[error("argument out of domain: {0}")]
    OutOfDomain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("serialization failure: {0}")]
    Serialization(String),
}

fn join(v: &[ScenarioViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
