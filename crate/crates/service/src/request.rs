use chrono::{DateTime, Utc};
use routecrowd_core::{GeoPoint, LandmarkRoute};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRequest {
    pub source: GeoPoint,
    pub destination: GeoPoint,
    pub departure: DateTime<Utc>,
    /// Hours the requester is willing to wait for an answer.
    pub deadline_hours: f64,
    pub requester: String,
}

impl RouteRequest {
    pub fn validate(&self) -> Result<(), ServiceError> {
        for p in [&self.source, &self.destination] {
            GeoPoint::new(p.lat, p.lon).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
        }
        if !(self.deadline_hours > 0.0 && self.deadline_hours.is_finite()) {
            return Err(ServiceError::InvalidRequest(format!("deadline must be positive, got {}", self.deadline_hours)));
        }
        if self.source == self.destination {
            return Err(ServiceError::InvalidRequest("source and destination coincide".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TruthReuse,
    AutoEval,
    Crowd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RequestStatus {
    /// Waiting on the crowd.
    Pending { task: String },
    Resolved { route: LandmarkRoute, method: Method, confidence: f64, task: Option<String> },
    /// The deadline passed without a single completed answer.
    Expired { task: String },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: String,
    pub request: RouteRequest,
    pub submitted_at: DateTime<Utc>,
    pub status: RequestStatus,
}
