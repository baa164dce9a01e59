use maskcomp::wire::WireError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Wire(#[from] WireError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Wire(_) => 3,
        }
    }

    pub(crate) fn io(action: &str, path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Runtime(format!("cannot {action} {}: {err}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
