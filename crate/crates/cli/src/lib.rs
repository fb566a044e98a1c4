//! Batch front end for `feynprop-core`: JSON configuration in, CSV or JSON
//! tables out.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{run, Command, Report};
pub use config::RunConfig;

/// Failures that stop a run, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(feynprop_core::Error),
}

impl CliError {
    /// 1 for usage, configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<feynprop_core::Error> for CliError {
    fn from(e: feynprop_core::Error) -> Self {
        use feynprop_core::Error::*;
        match e {
            Invalid(_) | Domain(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
