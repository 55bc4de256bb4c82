use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Config { path: PathBuf, line: usize, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("missing artifacts in {dir}: {}", missing.join(", "))]
    MissingArtifacts { dir: PathBuf, missing: Vec<String> },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: wassmap_core::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for wassmap_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
