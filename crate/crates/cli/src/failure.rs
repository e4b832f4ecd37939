//! Error records and exit codes.

use std::path::Path;

use serde_json::json;
use structleak::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub module: String,
    pub message: String,
    /// Help or version output from clap; printed verbatim with exit code 0.
    pub display_only: Option<String>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage".into(),
            module: "cli".into(),
            message: message.into(),
            display_only: None,
        }
    }

    pub fn from_clap(err: clap::Error) -> Self {
        use clap::error::ErrorKind;
        match err.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Self {
                code: 0,
                kind: "help".into(),
                module: "cli".into(),
                message: String::new(),
                display_only: Some(err.render().to_string()),
            },
            _ => Self::usage(err.render().to_string().trim_end()),
        }
    }

    pub fn core(module: &str, err: Error) -> Self {
        let code = match err {
            Error::Numeric(_) => EXIT_NUMERIC,
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            kind: err.kind().into(),
            module: module.into(),
            message: err.to_string(),
            display_only: None,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::core(
            "cli",
            Error::Io {
                path: path.to_path_buf(),
                source: err,
            },
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind,
                "module": self.module,
                "message": self.message,
                "exit_code": self.code,
            }
        })
    }
}

/// Tags core errors with the module that raised them.
pub trait Context<T> {
    fn in_module(self, module: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for structleak::Result<T> {
    fn in_module(self, module: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::core(module, e))
    }
}
