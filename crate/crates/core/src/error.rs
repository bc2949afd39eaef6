use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("promise violation: {0}")]
    PromiseViolation(String),

    #[error("run budget of {max_runs} exhausted at rank {rank} of {target}")]
    BudgetExhausted {
        max_runs: u64,
        rank: usize,
        target: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("simulation integrity: {0}")]
    SimulationIntegrity(String),

    #[error("state vector of {qubits} qubits exceeds the cap of {cap}")]
    TooManyQubits { qubits: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn promise(msg: impl Into<String>) -> Self {
        Error::PromiseViolation(msg.into())
    }
}
