use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("cannot read scenario {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario JSON: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Schema(String),
    #[error("numerical failure while {context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: bornlab_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } | CliError::Parse(_) | CliError::Schema(_) => 2,
            CliError::Numerical { .. } | CliError::Write { .. } => 3,
        }
    }
}

/// Attaches what was being computed to a core error.
pub fn numeric(context: &str) -> impl FnOnce(bornlab_core::Error) -> CliError + '_ {
    move |source| CliError::Numerical {
        context: context.to_string(),
        source,
    }
}
