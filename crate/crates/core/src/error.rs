use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid distribution `{input}`: {reason}")]
    InvalidDistribution { input: String, reason: String },

    #[error("truncation level must be nonnegative, got {0}")]
    NegativeTruncation(f64),

    #[error("derivative order {0} is outside 0..=3")]
    DerivativeOrder(usize),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("row variances sum to {sum}, expected 1")]
    VarianceSum { sum: f64 },

    #[error("row entry {index} has mean {mean}, expected 0")]
    NonZeroMean { index: usize, mean: f64 },

    #[error("row is empty")]
    EmptyRow,

    #[error("empty sample")]
    EmptySample,

    #[error("n = {n} outside the exact-oracle range 1..={max}")]
    OracleRange { n: usize, max: usize },

    #[error("distribution must have unit variance, has {0}")]
    NotUnitVariance(f64),

    #[error("per-swap bound precondition violated: {0}")]
    BoundPrecondition(String),

    #[error("invalid array family `{0}`")]
    InvalidFamily(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
