use std::path::PathBuf;

use hsi_core::{ErrorCategory, HsiError};
use thiserror::Error;

/// Errors raised by the command layer itself.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {reason}: `{text}`")]
    ConfigSyntax {
        line: usize,
        text: String,
        reason: String,
    },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("unknown config section `[{0}]`")]
    UnknownSection(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("missing required setting `{0}`")]
    MissingKey(String),
    #[error("`--set` expects key=value, got `{0}`")]
    BadOverride(String),
    #[error("output directory {0} is locked by another run (remove .hsi.lock if stale)")]
    Locked(PathBuf),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

fn category_code(c: ErrorCategory) -> i32 {
    match c {
        ErrorCategory::Io => EXIT_IO,
        ErrorCategory::Parse => EXIT_PARSE,
        ErrorCategory::Shape => EXIT_INVALID,
        ErrorCategory::Numerical => EXIT_NUMERICAL,
    }
}

/// Process exit code for a failed run. The first recognised error in the
/// cause chain decides.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<HsiError>() {
            return category_code(e.category());
        }
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::ConfigSyntax { .. } => EXIT_PARSE,
                CliError::Io { .. } | CliError::Locked(_) => EXIT_IO,
                _ => EXIT_INVALID,
            };
        }
        if let Some(e) = cause.downcast_ref::<serde_json::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_PARSE };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_IO
}
