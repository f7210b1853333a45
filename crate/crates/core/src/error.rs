use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
    #[error("decision mismatch: {0}")]
    StaleDecision(String),
    #[error("a decision is pending and must be answered first")]
    DecisionPending,
    #[error("corrupted simulator state: {0}")]
    CorruptedState(String),
    #[error("infeasible flow network: {0}")]
    InfeasibleNetwork(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("nothing evaluated yet")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
