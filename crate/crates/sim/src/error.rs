use routecrowd_core::ModelError;
use routecrowd_service::ServiceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{what}: {got} exceeds the limit of {max}")]
    TooLarge { what: &'static str, got: usize, max: usize },
    #[error("{what}: need at least {min}, got {got}")]
    TooSmall { what: &'static str, got: usize, min: usize },
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("event log: {0}")]
    Log(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
