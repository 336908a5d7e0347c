use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] asip_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
}

impl LabError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(ConfigError::Io { .. }) | Self::Io { .. } => "io",
            Self::Config(ConfigError::Parse { .. }) => "parse",
            Self::Config(ConfigError::Invalid(_)) => "invalid_config",
            Self::Core(asip_core::Error::InsufficientRuns { .. }) => "insufficient_runs",
            Self::Core(_) => "numeric",
            Self::Csv(_) | Self::Json(_) | Self::Format(_) => "format",
        }
    }

    /// The machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            Self::Config(ConfigError::Invalid(v)) => body["violations"] = json!(v),
            Self::Config(ConfigError::Parse { line, column, .. }) => {
                body["line"] = json!(line);
                body["column"] = json!(column);
            }
            Self::Core(asip_core::Error::InsufficientRuns { needed, got }) => {
                body["needed"] = json!(needed);
                body["got"] = json!(got);
            }
            _ => {}
        }
        json!({ "error": body })
    }
}
