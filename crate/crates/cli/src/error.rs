use thiserror::Error;

/// Runner errors, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// bad flags, config or experiment name: exit 2
    #[error("{0}")]
    Usage(String),

    /// a numerical routine refused its input mid-run: exit 1
    #[error(transparent)]
    Lab(#[from] calabi_lab::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type CliResult<T> = std::result::Result<T, CliError>;
