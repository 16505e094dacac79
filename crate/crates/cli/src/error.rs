use std::path::PathBuf;

use leakfit::allocation::InstanceIoError;
use leakfit::attack::AttackError;
use leakfit::datagen::{DatagenError, ReleaseIoError};
use leakfit::AllocationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Release(#[from] ReleaseIoError),
    #[error(transparent)]
    Instance(#[from] InstanceIoError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("{0}")]
    Config(String),
    #[error("{failed} of {total} targets failed; first error on {order}: {source}")]
    Partial {
        failed: usize,
        total: usize,
        order: String,
        source: AttackError,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }
}
