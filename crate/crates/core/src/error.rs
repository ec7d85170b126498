use thiserror::Error;

/// Errors produced across the crate.
///
/// Action and vertex indices carried by variants are 0-based.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("exploration rate {0} exceeds 1/2; beta1 is configured too small")]
    GammaTooLarge(f64),

    #[error("observation rate {0} exceeds 1/2; beta1 is configured too small")]
    RTooLarge(f64),

    #[error("action {0} is not Pareto optimal")]
    NonParetoAction(usize),

    #[error("actions {0} and {1} have identical loss rows")]
    DuplicateAction(usize, usize),

    #[error("neighbor graph of the game is disconnected")]
    DisconnectedNeighborGraph,

    #[error("neighboring actions {0} and {1} are not globally observable")]
    NotGloballyObservable(usize, usize),

    #[error("inconsistent linear system (residual {residual:e})")]
    Inconsistent { residual: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant violated at round {round}: {detail}")]
    InvariantViolation { round: u64, detail: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
