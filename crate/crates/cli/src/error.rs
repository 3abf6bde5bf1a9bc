use thiserror::Error;

/// Exit code for bad flags, config files or inputs that fail validation.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for failures while a command runs.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

pub fn config_error(message: impl std::fmt::Display) -> CliError {
    CliError::Config(message.to_string())
}

pub type CliResult<T> = Result<T, CliError>;
