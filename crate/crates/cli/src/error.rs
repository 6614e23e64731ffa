//! CLI error type: every failure maps to an exit code and a structured
//! JSON object printed to stderr.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Schema or value problem in the run config; exit code 2.
    Config { detail: String },
    /// Anything else; exit code 1.
    Run { kind: String, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Run { .. } => 1,
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Run { kind, .. } => kind,
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            CliError::Config { detail } => detail,
            CliError::Run { detail, .. } => detail,
        }
    }

    /// Stable machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.detail(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.detail())
    }
}

impl std::error::Error for CliError {}

impl From<lumiforge_core::Error> for CliError {
    fn from(e: lumiforge_core::Error) -> Self {
        CliError::Run {
            kind: "core".into(),
            detail: e.to_string(),
        }
    }
}

impl From<lumiforge_model::Error> for CliError {
    fn from(e: lumiforge_model::Error) -> Self {
        CliError::Run {
            kind: "model".into(),
            detail: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run {
            kind: "io".into(),
            detail: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run {
            kind: "json".into(),
            detail: e.to_string(),
        }
    }
}
