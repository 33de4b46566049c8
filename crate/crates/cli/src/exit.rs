use std::fmt;

use bsnn_core::{Error, SolverError};

/// Process exit statuses. Usage errors from argument parsing also exit 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Other = 1,
    Config = 2,
    Data = 3,
    Solver = 4,
    Certificate = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn failure(kind: ExitKind, message: impl Into<String>) -> anyhow::Error {
    Failure { kind, message: message.into() }.into()
}

fn classify_core(e: &Error) -> ExitKind {
    match e {
        Error::InvalidArgument(_) => ExitKind::Config,
        Error::InvalidNetwork(_)
        | Error::DimensionMismatch(_)
        | Error::UnboundVariable(_)
        | Error::Data(_)
        | Error::Io(_)
        | Error::Json(_) => ExitKind::Data,
        Error::Solver(_) => ExitKind::Solver,
        _ => ExitKind::Other,
    }
}

/// The first recognisable cause decides the status.
pub fn exit_kind(err: &anyhow::Error) -> ExitKind {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.kind;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return classify_core(e);
        }
        if cause.downcast_ref::<SolverError>().is_some() {
            return ExitKind::Solver;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return ExitKind::Data;
        }
    }
    ExitKind::Other
}
