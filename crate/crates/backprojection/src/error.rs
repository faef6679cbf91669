use std::io;
use std::path::PathBuf;

use backprojection_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    /// An input file that cannot be read is a configuration problem.
    pub fn input(path: &std::path::Path, source: io::Error) -> Self {
        AppError::Config(format!("{}: {source}", path.display()))
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for aborted training, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(_) => 3,
            AppError::Io { .. } => 1,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::NonFiniteLoss { .. } | CoreError::Domain { .. } | CoreError::NonPositiveActivation { .. } => {
                AppError::Numerical(err)
            }
            other => AppError::Config(other.to_string()),
        }
    }
}
