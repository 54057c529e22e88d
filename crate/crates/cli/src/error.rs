use std::fmt;

use scatterer_core::Error;

/// Errors of a command run, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(Error),
    Resonance(Error),
    Output(String),
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) | Self::Output(_) | Self::ChecksFailed { .. } => 2,
            Self::Resonance(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Resonance { .. } => Self::Resonance(e),
            Error::InvalidArgument(m) => Self::Config(m),
            Error::WavenumberOutOfRange { .. } => Self::Config(e.to_string()),
            Error::Io(io) => Self::Output(io.to_string()),
            other => Self::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numerical(e) => write!(f, "numerical failure: {e}"),
            Self::Resonance(e) => write!(f, "{e}"),
            Self::Output(m) => write!(f, "output error: {m}"),
            Self::ChecksFailed { failed, total } => write!(f, "{failed} of {total} checks failed"),
        }
    }
}
