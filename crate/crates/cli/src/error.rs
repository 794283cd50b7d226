use thiserror::Error;

/// Failures of a CLI run, each tied to an exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precondition(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<brownderiv::Error> for CliError {
    fn from(e: brownderiv::Error) -> Self {
        use brownderiv::Error as E;
        match e {
            E::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
