use std::fmt;
use std::path::PathBuf;

use pamsim_core::model::ModelError;

/// Errors carry their process exit code: 1 for invalid models and failed
/// runs, 2 for I/O and configuration problems.
#[derive(Debug)]
pub enum CliError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Config(String),
    Model(ModelError),
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Config(_) => 2,
            CliError::Model(_) | CliError::Run(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn run(e: impl fmt::Display) -> Self {
        CliError::Run(e.to_string())
    }

    pub fn config(e: impl fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Variant name of a model error, e.g. `NonzeroMean`.
pub fn model_error_kind(e: &ModelError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string()
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Model(e) => write!(f, "invalid model: {}: {e}", model_error_kind(e)),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
