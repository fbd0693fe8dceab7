use thiserror::Error;

use crate::kinds::Kind;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("capacity error: {kind} is limited to n <= {max}, got n = {n}")]
    Capacity { kind: Kind, n: usize, max: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record error: {0}")]
    Record(String),
    #[error(transparent)]
    Model(#[from] kls_core::Error),
}

impl LabError {
    /// Process exit code: 2 for configuration, capacity and parameter problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Capacity { .. } | LabError::Model(_) => 2,
            _ => 3,
        }
    }
}
