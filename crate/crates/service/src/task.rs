use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use routecrowd_core::familiarity::WorkerId;
use routecrowd_core::question::{AnswerTrace, QuestionTree};
use routecrowd_core::{CandidateSet, LandmarkId};
use serde::{Deserialize, Serialize};

use crate::config::{EarlyStopConfig, RewardConfig};
use crate::error::ServiceError;
use crate::request::{Method, RouteRequest};

/// Lifecycle of a crowd task. Declaration order is the only allowed direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Created,
    Assigned,
    Collecting,
    Resolved,
    Expired,
}

impl TaskState {
    pub fn is_closed(self) -> bool {
        matches!(self, TaskState::Resolved | TaskState::Expired)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub worker: WorkerId,
    pub assigned_at: DateTime<Utc>,
    pub trace: AnswerTrace,
    /// Candidate index reached by the trace.
    pub leaf: Option<usize>,
    pub completed_at: Option<DateTime<Utc>>,
    /// Order of completion within the task, from 0.
    pub completion_order: Option<usize>,
}

impl Assignment {
    pub fn new(worker: WorkerId, at: DateTime<Utc>) -> Self {
        Self { worker, assigned_at: at, trace: Vec::new(), leaf: None, completed_at: None, completion_order: None }
    }

    pub fn is_complete(&self) -> bool {
        self.leaf.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub route: usize,
    pub method: Method,
    /// Vote share among completed traces.
    pub confidence: f64,
    pub early_stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub request_id: String,
    pub request: RouteRequest,
    pub candidates: CandidateSet,
    pub selected: Vec<LandmarkId>,
    pub tree: QuestionTree,
    pub assignments: Vec<Assignment>,
    pub state: TaskState,
    pub resolution: Option<Resolution>,
    pub created_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    /// Next attempt at finding workers, while in `Created`.
    pub retry_at: Option<DateTime<Utc>>,
    /// Fewer eligible workers than requested were found.
    pub shortfall: bool,
}

impl Task {
    pub fn advance(&mut self, to: TaskState) -> Result<(), ServiceError> {
        if self.state.is_closed() || to <= self.state {
            return Err(ServiceError::Storage(format!("task {} cannot move from {:?} to {:?}", self.id, self.state, to)));
        }
        self.state = to;
        Ok(())
    }

    pub fn assignment(&self, worker: &WorkerId) -> Option<&Assignment> {
        self.assignments.iter().find(|a| &a.worker == worker)
    }

    pub fn completed(&self) -> usize {
        self.assignments.iter().filter(|a| a.is_complete()).count()
    }

    /// Completed traces per candidate route.
    pub fn votes(&self) -> BTreeMap<usize, usize> {
        let mut v = BTreeMap::new();
        for leaf in self.assignments.iter().filter_map(|a| a.leaf) {
            *v.entry(leaf).or_insert(0) += 1;
        }
        v
    }
}

/// Votes needed to stop early with `k` assigned workers.
pub fn early_stop_threshold(k: usize, cfg: &EarlyStopConfig) -> usize {
    cfg.m_min.max((cfg.eta_stop * k as f64).ceil() as usize)
}

/// The route to stop on, if one route has a unique lead and enough votes.
pub fn early_stop_check(t: &Task, cfg: &EarlyStopConfig) -> Option<usize> {
    let votes = t.votes();
    let top = votes.values().copied().max()?;
    let mut leaders = votes.iter().filter(|(_, &v)| v == top);
    let (&route, _) = leaders.next()?;
    if leaders.next().is_some() {
        return None;
    }
    (top >= early_stop_threshold(t.assignments.len(), cfg)).then_some(route)
}

/// Plurality over completed traces as `(route, votes, completed)`. Ties go
/// to the route whose first vote came earliest.
pub fn plurality(t: &Task) -> Option<(usize, usize, usize)> {
    let votes = t.votes();
    let first_vote = |route: usize| {
        t.assignments.iter().filter(|a| a.leaf == Some(route)).filter_map(|a| a.completion_order).min().unwrap_or(usize::MAX)
    };
    let (&route, &n) = votes.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| first_vote(*b.0).cmp(&first_vote(*a.0))))?;
    Some((route, n, t.completed()))
}

/// Points for one assignment once the task resolved to `route`.
pub fn reward_for(a: &Assignment, route: usize, cfg: &RewardConfig) -> u64 {
    match a.leaf {
        None => 0,
        Some(leaf) => cfg.base + cfg.per_question * a.trace.len() as u64 + if leaf == route { cfg.agreement_bonus } else { 0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use routecrowd_core::question::{Answer, QuestionNode};
    use routecrowd_core::GeoPoint;

    fn at(min: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 5, 6, 9, 0, 0).unwrap() + chrono::Duration::minutes(min)
    }

    fn task(k: usize) -> Task {
        let candidates = CandidateSet::from_ids([vec!["a"], vec!["b"], vec!["c"]]).unwrap();
        Task {
            id: "t1".into(),
            request_id: "r1".into(),
            request: RouteRequest {
                source: GeoPoint { lat: 1.0, lon: 1.0 },
                destination: GeoPoint { lat: 1.1, lon: 1.1 },
                departure: at(0),
                deadline_hours: 2.0,
                requester: "u".into(),
            },
            candidates,
            selected: vec!["a".into()],
            tree: QuestionTree { root: QuestionNode::Leaf { route: 0 } },
            assignments: (0..k).map(|i| Assignment::new(WorkerId(format!("w{i}")), at(0))).collect(),
            state: TaskState::Collecting,
            resolution: None,
            created_at: at(0),
            deadline: at(120),
            retry_at: None,
            shortfall: false,
        }
    }

    fn complete(t: &mut Task, worker: usize, leaf: usize, questions: usize) {
        let order = t.completed();
        let a = &mut t.assignments[worker];
        a.trace = (0..questions).map(|i| Answer { landmark: LandmarkId(format!("q{i}")), yes: true }).collect();
        a.leaf = Some(leaf);
        a.completed_at = Some(at(order as i64));
        a.completion_order = Some(order);
    }

    #[test]
    fn threshold_arithmetic() {
        let cfg = EarlyStopConfig::default();
        assert_eq!(early_stop_threshold(8, &cfg), 5);
        assert_eq!(early_stop_threshold(3, &cfg), 3);
        assert_eq!(early_stop_threshold(10, &cfg), 6);
    }

    #[test]
    fn five_of_eight_stops() {
        let cfg = EarlyStopConfig::default();
        let mut t = task(8);
        assert_eq!(early_stop_check(&t, &cfg), None);
        for w in 0..4 {
            complete(&mut t, w, 1, 2);
        }
        assert_eq!(early_stop_check(&t, &cfg), None);
        complete(&mut t, 4, 1, 2);
        assert_eq!(early_stop_check(&t, &cfg), Some(1));
    }

    #[test]
    fn ties_never_stop_early() {
        let cfg = EarlyStopConfig { eta_stop: 0.3, m_min: 3 };
        let mut t = task(8);
        for w in 0..3 {
            complete(&mut t, w, 0, 1);
        }
        for w in 3..6 {
            complete(&mut t, w, 2, 1);
        }
        assert_eq!(early_stop_check(&t, &cfg), None);
    }

    #[test]
    fn plurality_tie_goes_to_earliest() {
        let mut t = task(4);
        complete(&mut t, 0, 2, 1);
        complete(&mut t, 1, 0, 1);
        complete(&mut t, 2, 0, 1);
        complete(&mut t, 3, 2, 1);
        assert_eq!(plurality(&t), Some((2, 2, 4)));
        assert_eq!(plurality(&task(3)), None);
    }

    #[test]
    fn reward_rule() {
        let cfg = RewardConfig::default();
        let mut t = task(3);
        complete(&mut t, 0, 1, 3);
        complete(&mut t, 1, 2, 2);
        assert_eq!(reward_for(&t.assignments[0], 1, &cfg), 6);
        assert_eq!(reward_for(&t.assignments[1], 1, &cfg), 3);
        assert_eq!(reward_for(&t.assignments[2], 1, &cfg), 0);
    }

    #[test]
    fn states_only_move_forward() {
        let mut t = task(1);
        t.state = TaskState::Created;
        t.advance(TaskState::Assigned).unwrap();
        assert!(t.advance(TaskState::Created).is_err());
        assert!(t.advance(TaskState::Assigned).is_err());
        t.advance(TaskState::Collecting).unwrap();
        t.advance(TaskState::Resolved).unwrap();
        assert!(t.advance(TaskState::Expired).is_err());
    }
}
