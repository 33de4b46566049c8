use std::io;

use thiserror::Error;

use crate::causal::Variable;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unbound variable {0}")]
    UnboundVariable(Variable),

    #[error("malformed data: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("solver failure: {0}")]
    Solver(#[from] SolverError),

    #[error("singular regression system ({0} features)")]
    SingularRegression(usize),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failures of a decision procedure. These never masquerade as a verdict.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("could not start solver `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error("solver timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("solver process exited unexpectedly: {0}")]
    Crashed(String),
    #[error("unparseable solver output: {0:?}")]
    Unparseable(String),
    #[error("embedded SAT engine: {0}")]
    Engine(String),
    #[error("solver i/o: {0}")]
    Io(#[from] io::Error),
}
