//! Worker eligibility and rated-voting selection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::AssignError;
use crate::familiarity::{AccumulatedMatrix, WorkerId, WorkerProfile};
use crate::landmark::LandmarkId;

/// Default response rate when a worker has no history: one answer a day.
pub const DEFAULT_LAMBDA: f64 = 1.0 / 24.0;

/// Exponential response-time model with rate `lambda` per hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub lambda: f64,
    pub from_history: bool,
}

/// Maximum-likelihood rate of an exponential: the reciprocal mean. Falls back
/// to `default_lambda` when there is no usable history.
pub fn estimate_lambda(durations_hours: &[f64], default_lambda: f64) -> ResponseModel {
    let valid: Vec<f64> = durations_hours.iter().copied().filter(|d| *d > 0.0 && d.is_finite()).collect();
    if valid.is_empty() {
        return ResponseModel { lambda: default_lambda, from_history: false };
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    ResponseModel { lambda: 1.0 / mean, from_history: true }
}

/// Probability of a response within `t_hours`.
pub fn response_prob(m: &ResponseModel, t_hours: f64) -> f64 {
    1.0 - (-m.lambda * t_hours.max(0.0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EligibilityConfig {
    /// Minimum probability of answering before the deadline.
    pub eta_time: f64,
    /// A worker with this many outstanding tasks gets no more.
    pub max_outstanding: u32,
    /// Workers per task.
    pub k: usize,
    pub default_lambda: f64,
}

impl Default for EligibilityConfig {
    fn default() -> Self {
        Self { eta_time: 0.5, max_outstanding: 3, k: 5, default_lambda: DEFAULT_LAMBDA }
    }
}

impl EligibilityConfig {
    pub fn validate(&self) -> Result<(), AssignError> {
        if !(self.eta_time > 0.0 && self.eta_time < 1.0) {
            return Err(AssignError::InvalidParameter(format!("eta_time must lie in (0, 1), got {}", self.eta_time)));
        }
        if self.max_outstanding < 1 {
            return Err(AssignError::InvalidParameter("max_outstanding must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(AssignError::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.default_lambda > 0.0) {
            return Err(AssignError::InvalidParameter(format!("default_lambda must be positive, got {}", self.default_lambda)));
        }
        Ok(())
    }
}

/// What selection needs to know about a worker right now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerStatus {
    pub id: WorkerId,
    pub response: ResponseModel,
    pub outstanding: u32,
}

impl WorkerStatus {
    pub fn from_profile(p: &WorkerProfile, default_lambda: f64) -> Self {
        Self {
            id: p.id.clone(),
            response: estimate_lambda(&p.response_hours, default_lambda),
            outstanding: p.outstanding_tasks,
        }
    }
}

fn distinct(landmarks: &[LandmarkId]) -> Vec<&LandmarkId> {
    let mut seen = BTreeSet::new();
    landmarks.iter().filter(|l| seen.insert(*l)).collect()
}

/// Workers that know at least one task landmark, have quota left and are
/// likely enough to answer by the deadline.
pub fn candidate_workers(
    landmarks: &[LandmarkId],
    m: &AccumulatedMatrix,
    workers: &[WorkerStatus],
    cfg: &EligibilityConfig,
    t_hours: f64,
) -> Result<BTreeSet<WorkerId>, AssignError> {
    if landmarks.is_empty() {
        return Err(AssignError::EmptyTask);
    }
    let ls = distinct(landmarks);
    Ok(workers
        .iter()
        .filter(|w| response_prob(&w.response, t_hours) >= cfg.eta_time)
        .filter(|w| w.outstanding < cfg.max_outstanding)
        .filter(|w| ls.iter().any(|l| m.value(&w.id, l) > 0.0))
        .map(|w| w.id.clone())
        .collect())
}

/// Rated-voting preference of each candidate for one landmark: the `r`-th
/// most familiar of the `c` candidates who know it scores `1 − (r − 1)/c`.
/// Candidates who do not know it are absent (score 0).
pub fn preference_scores(landmark: &LandmarkId, candidates: &BTreeSet<WorkerId>, m: &AccumulatedMatrix) -> BTreeMap<WorkerId, f64> {
    let mut knowing: Vec<(&WorkerId, f64)> =
        candidates.iter().map(|w| (w, m.value(w, landmark))).filter(|(_, f)| *f > 0.0).collect();
    knowing.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let c = knowing.len() as f64;
    knowing.into_iter().enumerate().map(|(r, (w, _))| (w.clone(), 1.0 - r as f64 / c)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub totals: BTreeMap<WorkerId, f64>,
    /// Non-zero preferences per landmark.
    pub breakdown: BTreeMap<LandmarkId, BTreeMap<WorkerId, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Best first; ties by worker id.
    pub ranked: Vec<(WorkerId, f64)>,
    /// Fewer than `k` candidates were available.
    pub shortfall: bool,
    pub tally: VoteTally,
}

pub fn tally_votes(landmarks: &[LandmarkId], candidates: &BTreeSet<WorkerId>, m: &AccumulatedMatrix) -> VoteTally {
    let mut tally = VoteTally { totals: candidates.iter().map(|w| (w.clone(), 0.0)).collect(), ..Default::default() };
    for l in distinct(landmarks) {
        let prefs = preference_scores(l, candidates, m);
        for (w, p) in &prefs {
            *tally.totals.get_mut(w).expect("candidate") += p;
        }
        tally.breakdown.insert(l.clone(), prefs);
    }
    tally
}

/// The `k` eligible workers with the highest total preference over the task
/// landmarks.
pub fn top_k_workers(
    landmarks: &[LandmarkId],
    m: &AccumulatedMatrix,
    workers: &[WorkerStatus],
    cfg: &EligibilityConfig,
    t_hours: f64,
    k: usize,
) -> Result<Selection, AssignError> {
    if k < 1 {
        return Err(AssignError::InvalidParameter("k must be at least 1".into()));
    }
    let candidates = candidate_workers(landmarks, m, workers, cfg, t_hours)?;
    if candidates.is_empty() {
        return Err(AssignError::NoCandidates);
    }
    let tally = tally_votes(landmarks, &candidates, m);
    let mut ranked: Vec<(WorkerId, f64)> = tally.totals.iter().map(|(w, s)| (w.clone(), *s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let shortfall = ranked.len() < k;
    ranked.truncate(k);
    Ok(Selection { ranked, shortfall, tally })
}
