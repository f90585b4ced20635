use std::path::PathBuf;

use serde_json::{json, Value};

/// Everything that can stop a run.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gsfe_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Core(gsfe_core::Error::config(key, message))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(gsfe_core::Error::Config { .. }) => 3,
            CliError::Core(
                gsfe_core::Error::Schema(_)
                | gsfe_core::Error::Row { .. }
                | gsfe_core::Error::Integrity(_)
                | gsfe_core::Error::MissingBaseline { .. }
                | gsfe_core::Error::Lookup { .. },
            )
            | CliError::Parse { .. } => 4,
            _ => 1,
        }
    }

    /// The machine-readable sidecar payload.
    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Core(gsfe_core::Error::Config { key, .. }) => v["key"] = json!(key),
            CliError::Core(gsfe_core::Error::Row { line, .. }) => v["line"] = json!(line),
            CliError::Io { path, .. } | CliError::Parse { path, .. } => v["path"] = json!(path.display().to_string()),
            _ => {}
        }
        v
    }
}
