use locppr::{GraphError, SolverError};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_ARGUMENT: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Argument(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Argument(_) => EXIT_ARGUMENT,
        }
    }

    pub fn arg(msg: impl Into<String>) -> Self {
        CliError::Argument(msg.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::OutOfBounds { .. } => CliError::Argument(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidArgument(_) | SolverError::TooLarge { .. } => {
                CliError::Argument(e.to_string())
            }
            SolverError::Numerical(_) | SolverError::UndefinedR => {
                CliError::Numerical(e.to_string())
            }
            SolverError::Convergence(_) => CliError::Convergence(e.to_string()),
            SolverError::Graph(g) => g.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
