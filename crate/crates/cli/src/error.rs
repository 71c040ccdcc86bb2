//! CLI error type and exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] polyfront::Error),
    #[error("{failed} of {total} acceptance criteria failed")]
    AcceptanceFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use polyfront::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::AcceptanceFailed { .. } => 1,
            CliError::Core(e) => match e {
                E::Config(_) | E::NotFound(_) | E::Io(_) => 2,
                E::Numerical(_) | E::Precondition(_) => 3,
                E::DomainOverflow(_) => 4,
                E::Convergence(_) | E::Bracket(_) => 5,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
