//! File formats and command implementations behind the `stone` binary.

use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

pub mod check;
pub mod report;
pub mod run;
pub mod scenes;

pub use check::cmd_check;
pub use report::cmd_report;
pub use run::{cmd_run, RunArgs, RunManifest};
pub use scenes::{cmd_gen, read_scenes, write_scenes};

/// Version stamped into every file this crate writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error("{0} check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } => 2,
            CliError::CheckFailed(_) => 3,
        }
    }

    pub(crate) fn data(context: impl Display, message: impl Display) -> Self {
        CliError::Data {
            context: context.to_string(),
            message: message.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches a path or stage name to a lower-level error.
pub(crate) trait Context<T> {
    fn context(self, what: impl Display) -> CliResult<T>;
}

impl<T, E: Display> Context<T> for std::result::Result<T, E> {
    fn context(self, what: impl Display) -> CliResult<T> {
        self.map_err(|e| CliError::data(what, e))
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).context(path.display())?;
    serde_json::from_str(&text).context(path.display())
}
