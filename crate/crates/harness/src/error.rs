use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] pbwl::envs::EnvError),
    #[error(transparent)]
    Replay(#[from] pbwl::replay::ReplayError),
    #[error(transparent)]
    Learner(#[from] pbwl::learner::LearnerError),
    #[error(transparent)]
    Kernel(#[from] pbwl::KernelError),
    #[error("kernel property suite failed")]
    PropertyFailure,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
