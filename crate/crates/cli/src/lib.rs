//! Configuration, persistence and command drivers for the `biym` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod snapshot;
pub mod verify;

pub use config::RunConfig;
pub use snapshot::Snapshot;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Core(#[from] biym_core::Error),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 2 for bad input, 3 for numerical non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use biym_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Snapshot(_) => exit::CONFIG,
            CliError::Core(E::NoConvergence(_)) => exit::NO_CONVERGENCE,
            CliError::Core(
                E::InvalidConfig(_) | E::InvalidLattice(_) | E::InvalidMetric(_) | E::Precondition(_) | E::Unsupported(_),
            ) => exit::CONFIG,
            _ => exit::FAILURE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NO_CONVERGENCE: u8 = 3;
}
