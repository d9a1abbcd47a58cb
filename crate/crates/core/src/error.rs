use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown mode index {0}")]
    UnknownMode(usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("topological charge undefined: {0}")]
    UndefinedCharge(String),
}

pub type Result<T> = std::result::Result<T, Error>;
