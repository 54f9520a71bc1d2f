use std::fmt;

use touchprint_core::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    /// The capture session used up its frame budget.
    CaptureFailed { frames_seen: usize },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Core(e) => e.kind(),
            CliError::CaptureFailed { .. } => "FailureToAcquire",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Config(_) | Error::Io { .. } | Error::Codec(_)) => 2,
            CliError::Core(_) | CliError::CaptureFailed { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::CaptureFailed { frames_seen } => write!(f, "capture failed after {frames_seen} frames"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
