use std::path::PathBuf;

use iblab_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INVALID_CONFIG: i32 = 2;
    pub const SOLVER_FAILURE: i32 = 3;
    pub const CHECK_FAILURE: i32 = 4;
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } | HarnessError::Csv { .. } | HarnessError::Json { .. } => {
                exit::INVALID_CONFIG
            }
            HarnessError::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::InvalidConfiguration(_)
                | CoreError::InvalidDataset(_)
                | CoreError::Domain(_)
                | CoreError::Normalization(_) => exit::INVALID_CONFIG,
                _ => exit::SOLVER_FAILURE,
            },
            HarnessError::ChecksFailed { .. } => exit::CHECK_FAILURE,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Csv { path, source }
    }

    pub fn json(context: impl Into<String>) -> impl FnOnce(serde_json::Error) -> HarnessError {
        let context = context.into();
        move |source| HarnessError::Json { context, source }
    }
}
