use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("corpus {}: {message}", path.display())]
    InconsistentCorpus { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] scenred_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// Process exit code: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use scenred_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::ThreadPool(_) => 1,
            CliError::Core(E::InvalidArgument(_) | E::UnknownMethod(_)) => 1,
            CliError::Core(E::NonFiniteLoss { .. } | E::NonFiniteValue { .. }) => 3,
            _ => 2,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::File { path, source }
    }
}
