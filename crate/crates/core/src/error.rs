use thiserror::Error;

use crate::landmark::LandmarkId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate out of range: lat={lat}, lon={lon}")]
    OutOfRange { lat: f64, lon: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("landmark id `{0}` appears more than once")]
    DuplicateLandmark(LandmarkId),
    #[error("unknown landmark `{0}`")]
    UnknownLandmark(LandmarkId),
    #[error("a raw route needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("landmark route is empty")]
    EmptyRoute,
    #[error("landmark route repeats `{0}` consecutively")]
    ConsecutiveDuplicate(LandmarkId),
    #[error("candidate set has no routes")]
    NoRoutes,
    #[error("no route point lies within the snap radius of any landmark")]
    EmptyCalibration,
    #[error("snap radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("objective is undefined for an empty landmark set")]
    EmptySet,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignificanceError {
    #[error("unknown landmark `{0}` in visit events")]
    UnknownLandmark(LandmarkId),
    #[error("visit graph has no edges")]
    EmptyGraph,
    #[error("invalid iteration parameters: max_iters={max_iters}, tol={tol}")]
    InvalidParameters { max_iters: usize, tol: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("brute force is limited to {limit} beneficial landmarks, got {size}")]
    TooLarge { size: usize, limit: usize },
    #[error("selection supports at most {limit} beneficial landmarks, got {size}")]
    TooManyLandmarks { size: usize, limit: usize },
    #[error("no discriminative landmark set exists within the size range")]
    Infeasible,
    #[error("no significance known for landmark `{0}`")]
    UnknownLandmark(LandmarkId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("landmarks cannot separate routes {0:?}")]
    NotDiscriminative(Vec<usize>),
    #[error("answer trace diverges from the question tree at step {step}")]
    InvalidTrace { step: usize },
    #[error("no significance known for landmark `{0}`")]
    UnknownLandmark(LandmarkId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmfError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("objective became non-finite at iteration {0}")]
    Divergence(usize),
    #[error("invalid training parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("no eligible worker for the task")]
    NoCandidates,
    #[error("task has no landmarks")]
    EmptyTask,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}
