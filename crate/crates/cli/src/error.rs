use std::fmt;
use std::process::ExitCode;

/// A command failure, bucketed by the stable exit-code contract:
/// 1 usage/config, 2 data, 3 internal.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or a missing/malformed/inconsistent config.
    Usage(String),
    /// The config is fine but the data it points at is not.
    Data(String),
    /// Bugs and environment trouble (output I/O, poisoned workers).
    Internal(String),
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(msg.to_string())
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Failure::Data(msg.to_string())
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        Failure::Internal(msg.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(1),
            Failure::Data(_) => ExitCode::from(2),
            Failure::Internal(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) | Failure::Data(msg) | Failure::Internal(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for Failure {}
