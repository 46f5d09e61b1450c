use std::fmt;
use std::path::Path;

use hazardforge_core::Error;
use serde::Serialize;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

/// Error reported on stderr as a single JSON object.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    #[serde(skip)]
    pub exit_code: i32,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn input(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            message: message.into(),
            exit_code: EXIT_INPUT,
        }
    }

    pub fn missing(kind: &str, path: &Path) -> Self {
        Self::input(kind, format!("{} does not exist", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

/// A closed downstream pipe (`| head`) ends output early but is not a failure.
pub const BROKEN_PIPE: &str = "BrokenPipe";

fn is_broken_pipe(e: &Error) -> bool {
    let pipe = |io: &std::io::Error| io.kind() == std::io::ErrorKind::BrokenPipe;
    match e {
        Error::Io(io) => pipe(io),
        Error::Json(j) => j.io_error_kind() == Some(std::io::ErrorKind::BrokenPipe),
        Error::Csv(c) => matches!(c.kind(), csv::ErrorKind::Io(io) if pipe(io)),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            kind: if is_broken_pipe(&e) { BROKEN_PIPE.into() } else { e.kind().into() },
            message: e.to_string(),
            exit_code: if e.is_degenerate() { EXIT_DEGENERATE } else { EXIT_INPUT },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}
