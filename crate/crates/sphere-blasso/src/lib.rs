//! Command-line front end for sparse-measure training of shallow ReLU
//! networks on the sphere: TOML configuration, JSON/CSV results, SVG plots
//! and the reproduction checks for the built-in data sets.

pub mod checks;
pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod repro;

/// Errors of the front end, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed configuration or input file (exit code 2).
    #[error("{0}")]
    Input(String),
    /// A failed computation, check or write (exit code 1).
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Core(#[from] sphere_blasso_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) | CliError::Core(_) => 1,
        }
    }
}
