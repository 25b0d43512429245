//! Failure classes and their process exit codes.

use std::fmt;

/// A failure that maps to a documented exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    /// Malformed or invalid scenario, exit status 2.
    Config(String),
    /// A solver diverged or did not converge, exit status 3.
    Solver(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

/// Exit status for any error chain: the first [`Failure`] decides, anything else is a config error.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.chain().find_map(|e| e.downcast_ref::<Failure>()).map_or(2, Failure::exit_code)
}
