use std::fmt;

use faf_core::FafError;
use faf_ml::MlError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Errors mapped onto the process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit 1).
    Usage(String),
    /// Unreadable or invalid input data, failed training (exit 2).
    Data(String),
    /// A verification property failed (exit 3).
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    /// Prefixes the message with `what`.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Verification(m) => CliError::Verification(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FafError> for CliError {
    fn from(e: FafError) -> Self {
        match e {
            FafError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        match e {
            MlError::InvalidConfig(m) => CliError::Usage(m),
            MlError::Core(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
