use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] induction_core::Error),
    #[error("missing {artifact}: run `{stage}` first")]
    Missing { artifact: String, stage: &'static str },
    #[error("configuration changed since `{stage}` ran (recorded {recorded}, now {current}); re-run `{stage}`")]
    StageMismatch {
        stage: &'static str,
        recorded: String,
        current: String,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest: {0}")]
    Manifest(String),
}

impl LabError {
    /// 2 for numerical divergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(e) if e.is_divergence() => 2,
            _ => 1,
        }
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;
