use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("missing or unreadable artifact {path}: {reason} (run `solve` first)")]
    Artifact { path: PathBuf, reason: String },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A computed result failed its own consistency check.
    #[error("check failed: {0}")]
    Check(String),

    #[error(transparent)]
    Core(#[from] wdro_mpc::Error),
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Artifact { .. } | CliError::Write { .. } => EXIT_USAGE,
            CliError::Core(wdro_mpc::Error::InvalidInput(_)) => EXIT_USAGE,
            CliError::Core(wdro_mpc::Error::Infeasible { .. }) => EXIT_INFEASIBLE,
            CliError::Core(_) | CliError::Check(_) => EXIT_NUMERICAL,
        }
    }
}
