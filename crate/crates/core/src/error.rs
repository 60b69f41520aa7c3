use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state space too large: (K+1)^k = {size} exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: usize },

    #[error("dimension index {index} out of range (k = {k})")]
    Dimension { index: usize, k: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("row {row} of the transition matrix is not stochastic (sum = {sum}, min entry = {min})")]
    NotStochastic { row: usize, sum: f64, min: f64 },

    #[error("transition matrix is reducible; communicating classes: {classes:?}")]
    Reducible { classes: Vec<Vec<usize>> },

    #[error("supplied stationary distribution is inconsistent with the chain (max deviation {deviation:e})")]
    Stationarity { deviation: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mgf evaluation overflowed for s_{dimension} = {s}, x_{dimension} = {x}")]
    EvaluationDomain { dimension: usize, s: f64, x: u32 },

    #[error("unsupported service law in dimension {dimension}: {reason}")]
    UnsupportedService { dimension: usize, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("trajectory covers [0, {horizon}] but t = {requested} was requested")]
    Coverage { horizon: f64, requested: f64 },

    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
