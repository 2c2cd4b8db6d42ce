//! Command implementations behind the `zscap` binary.
//!
//! Every command reads JSON-lines or text inputs, runs the corresponding
//! library operations and returns a serializable report. Reports embed the
//! resolved configuration, so identical inputs and flags give identical
//! bytes.

pub mod commands;
pub mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] zscap_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 1 for bad inputs, 2 for contract violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_input_error() => 1,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Usage(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Pretty JSON with a trailing newline.
pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are serializable");
    s.push('\n');
    s
}

pub fn write_output(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
