//! CLI failure taxonomy mapped to process exit codes.
//!
//! * exit 2 — usage errors: bad flags, unreadable config file, bad worker
//!   count (clap reports its own parse errors with the same code).
//! * exit 3 — config schema violations, always naming the JSON field path.
//! * exit 1 — everything downstream: semantic validation and runtime errors.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Command-line level problem (exit 2).
    Usage(String),
    /// Config file does not match the schema (exit 3). `path` is the JSON
    /// field path, e.g. `grid.delta_f_hz`.
    Schema { path: String, message: String },
    /// Computation or I/O failure after a well-formed invocation (exit 1).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Schema { .. } => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Schema { path, message } => {
                write!(f, "config schema violation at `{path}`: {message}")
            }
            CliError::Runtime(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn schema(path: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Schema { path: path.into(), message: message.into() }
}

/// Wraps any library error as a runtime failure with context.
pub fn runtime(context: &str, err: impl std::error::Error + Send + Sync + 'static) -> CliError {
    CliError::Runtime(anyhow::Error::new(err).context(context.to_string()))
}
