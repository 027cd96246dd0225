use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no support point carries positive mass under either distribution")]
    EmptySupport,
    #[error("null mass is zero at point `{0}`; the likelihood ratio is +inf there")]
    ZeroNullMass(String),
    #[error("density integrates to (approximately) zero over the grid")]
    NonpositiveTotalMass,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid loss family: {0}")]
    InvalidLosses(String),
    #[error("invalid test family: {0}")]
    InvalidFamily(String),
    #[error("invalid e-variable: {0}")]
    InvalidEVariable(String),
    #[error("scenario b = {0} is not in the loss family")]
    ScenarioNotFound(f64),
    #[error("scenario index {index} out of range for {count} scenarios")]
    ScenarioOutOfRange { index: usize, count: usize },
    #[error("rejection target must lie in (0, 1], got {0}")]
    InvalidTarget(f64),
    #[error("bad mixture weights: {0}")]
    BadWeights(String),
    #[error("statistic class `{0}` has zero null mass")]
    EmptyClass(String),
    #[error("statistic is not sufficient: the likelihood ratio varies within class `{0}`")]
    NotSufficient(String),
    #[error("binary Neyman-Pearson test needs randomization on this problem (gamma = {0})")]
    RandomizationRequired(f64),
    #[error("column for scenario index {0} is not a nondecreasing function of the likelihood ratio")]
    NotMonotoneInLR(usize),
    #[error("operation requires a binary test family")]
    NotBinary,
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("losses are degenerate: {0}")]
    DegenerateLosses(String),
    #[error("marginal probability of point {0} is zero")]
    ZeroMarginal(usize),
    #[error("cannot calibrate lambda: Bayesian type-I risk is {0} at the cap")]
    CannotCalibrate(f64),
    #[error("Bayesian type-I risk increased along the lambda path: S({lo}) = {risk_lo} < S({hi}) = {risk_hi}")]
    NonMonotoneCalibration { lo: f64, hi: f64, risk_lo: f64, risk_hi: f64 },
    #[error("problem has {0} distinct type-I losses; expected exactly one")]
    MultipleEffectiveLosses(usize),
    #[error("improvement post-check failed: {0}")]
    ImprovementCheckFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidConfig(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
