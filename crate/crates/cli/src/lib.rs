//! Library side of the `rmlayer` command: scenario runs, model tables and
//! the verification suite. `main.rs` is a thin clap wrapper around these.

pub mod config;
pub mod scenario;
pub mod tables;
pub mod verify;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const RUNTIME: i32 = 3;
    pub const VERIFICATION: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("{failed} verification check(s) failed")]
    Verification { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Runtime(_) => exit::RUNTIME,
            CliError::Verification { .. } => exit::VERIFICATION,
        }
    }
}

impl From<rmlayer_core::ProfileError> for CliError {
    fn from(e: rmlayer_core::ProfileError) -> Self {
        CliError::Config(e.to_string())
    }
}
