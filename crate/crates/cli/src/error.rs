use slicedmi::SmiError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input data.
    #[error("input error: {0}")]
    Input(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("estimator error: {0}")]
    Estimator(#[from] SmiError),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Output { .. } => 2,
            CliError::Estimator(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    /// Validation failures of a library config are config errors, not
    /// estimator errors.
    pub fn invalid(err: SmiError) -> Self {
        CliError::Config(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
