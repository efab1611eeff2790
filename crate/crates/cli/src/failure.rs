use std::fmt;

use nld_core::Error;

/// Command failure, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Solver { stage: &'static str, error: Error },
    Io(String),
    Internal { stage: &'static str, error: Error },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Solver { .. } => 3,
            Failure::Io(_) => 4,
            Failure::Internal { .. } => 1,
        }
    }

    /// Classify a core error raised during `stage`.
    pub fn at(stage: &'static str) -> impl Fn(Error) -> Failure {
        move |error| {
            let root = match &error {
                Error::Continuation { source, .. } => source.as_ref(),
                e => e,
            };
            match root {
                Error::InvalidGrid(_)
                | Error::InvalidParameter(_)
                | Error::ParameterMismatch(_)
                | Error::OutOfRange { .. }
                | Error::WindowTooSmall { .. } => Failure::Usage(format!("{stage}: {error}")),
                Error::Io(_) => Failure::Io(format!("{stage}: {error}")),
                e if e.is_solver_failure() => Failure::Solver { stage, error },
                Error::NonFinite { .. } | Error::VanishingField | Error::Degenerate(_) => {
                    Failure::Solver { stage, error }
                }
                _ => Failure::Internal { stage, error },
            }
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Solver { stage, error } => write!(f, "solver failure in {stage}: {error}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Internal { stage, error } => write!(f, "internal error in {stage}: {error}"),
        }
    }
}
