use std::fmt;

use serde::Serialize;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Solver,
    Mismatch,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Solver => 2,
            ErrorKind::Mismatch => 3,
        }
    }
}

/// Machine-readable error record printed to stderr as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

impl CliError {
    pub fn validation(message: impl Into<String>, details: Vec<String>) -> CliError {
        CliError {
            kind: ErrorKind::Validation,
            message: message.into(),
            details,
        }
    }

    pub fn solver(message: impl Into<String>) -> CliError {
        CliError {
            kind: ErrorKind::Solver,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn mismatch(message: impl Into<String>, details: Vec<String>) -> CliError {
        CliError {
            kind: ErrorKind::Mismatch,
            message: message.into(),
            details,
        }
    }

    pub fn context(mut self, what: &str) -> CliError {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)?;
        for d in &self.details {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

impl From<circpack::Error> for CliError {
    fn from(e: circpack::Error) -> CliError {
        use circpack::Error as E;
        match e {
            E::InvalidScenario(v) => CliError::validation("invalid scenario", v),
            E::Calibration(v) => CliError::validation("calibration failed", v),
            E::InvalidAllocation(_) | E::InvalidPolicy(_) | E::Unsupported(_) => {
                CliError::validation(e.to_string(), Vec::new())
            }
            other => CliError::solver(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::solver(format!("i/o error: {e}"))
    }
}
