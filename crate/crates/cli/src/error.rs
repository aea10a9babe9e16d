use std::process::ExitCode;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Io => 1,
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

/// Failure reported on stderr as a one-line JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::config(message.into().trim_end().to_string())
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    pub fn report(&self) -> ExitCode {
        let code = self.kind.exit_code();
        let body = serde_json::json!({
            "error": { "kind": self.kind, "message": self.message, "exit_code": code }
        });
        eprintln!("{body}");
        ExitCode::from(code)
    }
}

impl From<mdiqkd::Error> for CliError {
    fn from(e: mdiqkd::Error) -> Self {
        Self {
            kind: if e.is_numerical() {
                ErrorKind::Numerical
            } else {
                ErrorKind::Config
            },
            message: e.to_string(),
        }
    }
}
