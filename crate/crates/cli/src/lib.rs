//! Reproducible run orchestration: configuration files, the wavefunction
//! archive format, and the solve/analyze/scan/export commands behind the
//! `scarlab` binary.

pub mod archive;
pub mod commands;
pub mod config;

use std::fmt;

/// Command-level failures mapped onto process exit codes:
/// 1 usage, 2 numerical, 3 I/O.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<scarlab::Error> for CliError {
    fn from(e: scarlab::Error) -> Self {
        match &e {
            scarlab::Error::InvalidConfig(_)
            | scarlab::Error::InvalidGrid(_)
            | scarlab::Error::NotCoprime { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
