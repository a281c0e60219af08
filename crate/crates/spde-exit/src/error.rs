use thiserror::Error;

/// Errors split into validation (bad inputs, caught before any work) and
/// runtime (a computation started and went bad). The CLI maps the former to
/// exit status 1 and the latter to 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("{what} is not finite at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("explicit scheme unstable: dt/dx^2 = {ratio:.6} exceeds limit {limit}")]
    StabilityViolation { ratio: f64, limit: f64 },

    #[error("field value {value:.6} exceeds auxiliary range a_max = {a_max}")]
    AuxiliaryRangeExceeded { value: f64, a_max: f64 },

    #[error("cumulative field decreases by {drop:.3e} at node {index} (tolerance {tol:.1e})")]
    NotMonotone { index: usize, drop: f64, tol: f64 },

    #[error("path cannot be replayed: {0}")]
    MissingReplay(&'static str),

    #[error("rate infimum {rate:.6} does not exceed slack delta = {delta}")]
    RateBelowSlack { rate: f64, delta: f64 },

    #[error("{0}")]
    Runtime(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidWeights(_)
                | Error::InvalidConfig(_)
                | Error::Format(_)
        )
    }
}
