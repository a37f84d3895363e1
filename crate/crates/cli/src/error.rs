use diversity_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Bad inputs are config errors; failures inside a computation are numeric.
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::Domain { .. } | CoreError::Parameter(_) | CoreError::Precondition(_) => {
                CliError::Config(e.to_string())
            }
            CoreError::Evaluation(_) | CoreError::Quadrature { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}
