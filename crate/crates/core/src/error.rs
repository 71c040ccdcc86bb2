use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("domain overflow: {0}")]
    DomainOverflow(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn overflow(msg: impl Into<String>) -> Self {
        Error::DomainOverflow(msg.into())
    }
}
