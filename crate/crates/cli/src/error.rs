use std::path::PathBuf;

use thiserror::Error;

/// CLI failure, carrying the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] heavytail_opt::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("binomial gate failed: {successes}/{trials} successes, p-value {p_value:.4} <= {level}")]
    GateFailed {
        successes: u64,
        trials: u64,
        p_value: f64,
        level: f64,
    },

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_config() => 2,
            CliError::Core(_) => 1,
            CliError::Io { .. } => 4,
            CliError::GateFailed { .. } => 3,
            CliError::CheckFailed(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
