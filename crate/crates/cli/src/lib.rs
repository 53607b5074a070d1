//! Scenario runner behind the `cavint` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod scenario;

pub use config::{FieldError, ScenarioConfig, ScenarioKind};
pub use report::{RunReport, Status};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const CONVERGENCE: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration ({} problem(s))", .0.len())]
    Invalid(Vec<FieldError>),

    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(..) | CliError::Output(_) => exit::IO,
            CliError::Parse(_) | CliError::Invalid(_) => exit::CONFIG,
        }
    }
}
