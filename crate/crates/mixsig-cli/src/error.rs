//! Error type carrying the process exit code.
//!
//! 0 success, 2 validation, 3 diagnostic failure (rank or strategy conditions),
//! 4 numerical failure.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Diagnostic,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Diagnostic => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// Optional multi-line report (assumption checks, diagnostics).
    pub report: Option<String>,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Validation, message: msg.into(), report: None }
    }

    pub fn diagnostic(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Diagnostic, message: msg.into(), report: None }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Numerical, message: msg.into(), report: None }
    }

    pub fn with_report(mut self, report: String) -> Self {
        self.report = Some(report);
        self
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<mixsig::Error> for CliError {
    fn from(e: mixsig::Error) -> Self {
        let kind = match &e {
            mixsig::Error::InvalidInput(_) | mixsig::Error::Unsupported(_) => ErrorKind::Validation,
            mixsig::Error::Diagnostic(_) => ErrorKind::Diagnostic,
            mixsig::Error::Numerical { .. } => ErrorKind::Numerical,
        };
        Self { kind, message: e.to_string(), report: None }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::config(format!("csv: {e}"))
    }
}
