use std::process::ExitCode;

use qlyap_core::Error as CoreError;

/// Failures surfaced by the command-line frontend, each with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{failed} of {total} sweep points failed")]
    PartialSweep { failed: usize, total: usize },
    #[error("{0}; try --mode fv or a shorter --t")]
    Starvation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
            CliError::PartialSweep { .. } => 4,
            CliError::Starvation(_) => 5,
            CliError::Runtime(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) | CoreError::NotOneDimensional { .. } => CliError::Usage(e.to_string()),
            CoreError::Solver(_) => CliError::Solver(e.to_string()),
            CoreError::Starvation { .. } | CoreError::Fit { .. } => CliError::Starvation(e.to_string()),
            CoreError::Evaluation { .. } | CoreError::Simulation { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
