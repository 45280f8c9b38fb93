use std::fmt;

/// Failures of a command, with their process exit codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad flags, unreadable or malformed files, invalid parameters.
    Input(String),
    /// An iterative computation stopped before its tolerance.
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::NonConvergence(m) => write!(f, "no convergence: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<bumplab_core::Error> for CliError {
    fn from(e: bumplab_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
