use std::fmt;
use std::path::PathBuf;

use fedpp_core::Error as CoreError;

use crate::config::ConfigError;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Divergence(String),
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Divergence(_) => 2,
            AppError::Config(_) => 3,
            AppError::Io(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        AppError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "configuration error: {m}"),
            AppError::Divergence(m) => write!(f, "divergence: {m}"),
            AppError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Divergence(_) => AppError::Divergence(e.to_string()),
            CoreError::Io { .. } | CoreError::Format { .. } => AppError::Io(e.to_string()),
            CoreError::InvalidArgument(_) | CoreError::Config(_) => AppError::Config(e.to_string()),
        }
    }
}

pub fn write_file(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), AppError> {
    std::fs::write(&path, contents).map_err(|e| AppError::io(&path, e))
}
