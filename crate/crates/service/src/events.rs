use chrono::{DateTime, Utc};
use routecrowd_core::familiarity::WorkerId;
use routecrowd_core::{LandmarkId, LandmarkRoute};
use serde::{Deserialize, Serialize};

use crate::evaluate::AutoRule;

/// One entry of the append-only log. Sequence numbers start at 0 and have
/// no gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    KnowledgeUpdated { what: String },
    RequestSubmitted { request: String, candidates: usize },
    RequestFailed { request: String, reason: String },
    TruthReused { request: String, truth: String, resolved: LandmarkRoute },
    AutoResolved { request: String, route: usize, rule: AutoRule, confidence: f64, resolved: LandmarkRoute },
    TaskCreated { task: String, request: String, selected: Vec<LandmarkId>, tree_depth: usize, candidates: usize },
    WorkersAssigned { task: String, workers: Vec<WorkerId>, shortfall: bool },
    NoWorkers { task: String, retry_at: DateTime<Utc> },
    AnswerRecorded { task: String, worker: WorkerId, landmark: LandmarkId, yes: bool },
    TraceCompleted { task: String, worker: WorkerId, route: usize, questions: usize },
    EarlyStop { task: String, route: usize, votes: usize, threshold: usize, completed: usize },
    TaskResolved {
        task: String,
        request: String,
        route: usize,
        votes: usize,
        completed: usize,
        confidence: f64,
        early_stop: bool,
        resolved: LandmarkRoute,
    },
    TaskExpired { task: String, request: String },
    TruthStored { truth: String, task: String, confidence: f64 },
    RewardGranted { task: String, worker: WorkerId, points: u64 },
}
