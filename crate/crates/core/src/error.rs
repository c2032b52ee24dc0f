use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("independence failure: {0}")]
    IndependenceFailure(String),
    #[error("quadrature failed to converge on cell {cell}: {reason}")]
    QuadratureFailure { cell: usize, reason: String },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
