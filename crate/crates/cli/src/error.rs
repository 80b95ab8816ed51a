use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad experiment id, key, value or parameter combination (exit code 2).
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cgsde_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}
