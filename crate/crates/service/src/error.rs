use routecrowd_core::error::{AssignError, ModelError, PmfError, SelectError, SignificanceError, TreeError};
use routecrowd_core::LandmarkId;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("worker `{worker}` is not assigned to task `{task}`")]
    NotAssigned { task: String, worker: String },
    #[error("expected an answer about {expected:?}, got `{got}`")]
    WrongQuestion { expected: Option<LandmarkId>, got: LandmarkId },
    #[error("task `{0}` is closed")]
    TaskClosed(String),
    #[error("unauthorized")]
    Unauthorized,
    #[error("no landmark data loaded")]
    NoLandmarks,
    #[error("storage: {0}")]
    Storage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Significance(#[from] SignificanceError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Pmf(#[from] PmfError),
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::Storage(format!("corrupt record: {e}"))
    }
}
