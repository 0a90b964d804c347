use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("parse error in {origin} at line {line}, column {column}: {message}")]
    Parse { origin: String, line: usize, column: usize, message: String },

    #[error("validation error ({invariant}): {detail}")]
    Validation { invariant: String, detail: String },

    #[error("{0}")]
    Domain(topoflat::error::Error),

    #[error("io error: {0}")]
    Io(String),

    #[error("replay mismatch: {0}")]
    Replay(String),
}

impl From<topoflat::error::Error> for CliError {
    fn from(e: topoflat::error::Error) -> Self {
        match e {
            topoflat::error::Error::Validation { invariant, detail } => CliError::Validation { invariant: invariant.into(), detail },
            other => CliError::Domain(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            _ => 1,
        }
    }
}
