use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("R is undefined: the first outer iteration started with a zero gradient")]
    UndefinedR,
    #[error("problem too large for the dense oracle: n = {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> SolverError {
    SolverError::InvalidArgument(msg.into())
}
