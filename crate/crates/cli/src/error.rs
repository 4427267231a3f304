use std::path::PathBuf;

use thiserror::Error;

/// A configuration problem, located by key and (when known) line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{key}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(line: Option<usize>, key: &str, message: String) -> Self {
        ConfigError {
            line,
            key: key.to_string(),
            message,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical failure: {0}")]
    Numerical(angio_core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
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
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => exit::USAGE,
            CliError::Numerical(_) => exit::NUMERICAL,
        }
    }
}

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const BLOWUP: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}
