use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The parameter point cannot be evaluated for some observation; samplers
    /// map this to a log density of -inf.
    #[error("infeasible parameter point: {0}")]
    Infeasible(String),

    /// The cure probability is numerically 1, so the susceptible
    /// distribution is undefined.
    #[error("degenerate susceptible distribution (cure probability {0})")]
    Degenerate(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid hyperparameters: {0}")]
    Hyperparameters(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace is empty after burn-in")]
    EmptyTrace,

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("zero within-chain variance")]
    ZeroVariance,

    #[error("censoring calibration did not converge: {0}")]
    Calibration(String),

    #[error("non-finite log posterior after {0} initialisation attempts")]
    Initialisation(usize),
}
