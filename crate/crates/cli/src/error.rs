use std::path::{Path, PathBuf};

use serde::Serialize;

use optospring::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("profile: {0}")]
    Profile(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: config hash {found} does not match {expected}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Instability,
    FitFailure,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Instability => 3,
            ErrorKind::FitFailure => 4,
            ErrorKind::Io => 5,
        }
    }
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Core(e) => match e {
                Error::StaticallyUnstable { .. } | Error::UnstablePlant { .. } => ErrorKind::Instability,
                Error::NonConvergence { .. }
                | Error::FitNonConvergence { .. }
                | Error::Unidentifiable(_)
                | Error::LineNotFound { .. }
                | Error::NonPositiveBandPower(_) => ErrorKind::FitFailure,
                _ => ErrorKind::Validation,
            },
            CliError::Profile(_) | CliError::Scenario(_) | CliError::HashMismatch { .. } => ErrorKind::Validation,
            CliError::Io { .. } => ErrorKind::Io,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }
}

/// Machine-readable failure record written as `error.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: ErrorKind,
    pub exit_code: i32,
    pub stage: String,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(stage: &str, err: &CliError) -> Self {
        Self {
            kind: err.kind(),
            exit_code: err.exit_code(),
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }
}
