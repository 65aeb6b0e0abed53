use std::path::{Path, PathBuf};

use contact_rom::experiment::{Stage, StageError};
use contact_rom::ErrorCategory;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {}: referenced file {} does not exist", Stage::LoadSystem.as_str(), .0.display())]
    MissingFile(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage {}: {error}", stage.as_str())]
    Stage {
        stage: Stage,
        #[source]
        error: contact_rom::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn missing_file(path: &Path) -> Self {
        CliError::MissingFile(path.to_path_buf())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn stage(stage: Stage) -> impl FnOnce(contact_rom::Error) -> Self {
        move |error| CliError::Stage { stage, error }
    }

    /// 2 configuration, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::MissingFile(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Stage { error, .. } => match error.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Numerical => 3,
                ErrorCategory::Io => 4,
            },
        }
    }
}

impl From<StageError> for CliError {
    fn from(e: StageError) -> Self {
        CliError::Stage {
            stage: e.stage,
            error: e.error,
        }
    }
}
