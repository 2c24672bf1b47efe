//! Per-request results of a scenario, built from the event log.

use std::collections::BTreeMap;
use std::io::Write;

use routecrowd_core::familiarity::WorkerId;
use routecrowd_core::LandmarkRoute;
use routecrowd_service::events::{Event, EventKind};
use routecrowd_service::{Method, RequestRecord, RequestStatus, Task};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pending,
    Resolved,
    Expired,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestRow {
    pub index: usize,
    pub request: String,
    pub repeat_of: Option<usize>,
    pub outcome: Outcome,
    pub method: Option<Method>,
    pub task: Option<String>,
    pub candidates: usize,
    pub selected: usize,
    pub tree_depth: Option<usize>,
    /// Questions answered by each assigned worker, in assignment order.
    pub questions: Vec<(WorkerId, usize)>,
    pub completed: usize,
    pub early_stop: bool,
    pub resolved: Option<LandmarkRoute>,
    /// Whether the resolved route has the preferred route's landmarks.
    pub correct: Option<bool>,
}

impl RequestRow {
    fn new(index: usize, request: String, world: &World, candidates: usize) -> Self {
        Self {
            index,
            request,
            repeat_of: world.requests.get(index).and_then(|r| r.repeat_of),
            outcome: Outcome::Pending,
            method: None,
            task: None,
            candidates,
            selected: 0,
            tree_depth: None,
            questions: Vec::new(),
            completed: 0,
            early_stop: false,
            resolved: None,
            correct: None,
        }
    }

    fn resolve(&mut self, world: &World, method: Method, route: LandmarkRoute) {
        self.outcome = Outcome::Resolved;
        self.method = Some(method);
        self.correct = world.requests.get(self.index).map(|r| r.truth_route().membership() == route.membership());
        self.resolved = Some(route);
    }

    pub fn total_questions(&self) -> usize {
        self.questions.iter().map(|(_, q)| q).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub requests: usize,
    pub truth_reuse: usize,
    pub auto_eval: usize,
    pub crowd: usize,
    pub expired: usize,
    pub failed: usize,
    pub pending: usize,
    pub crowd_correct: usize,
    pub resolved_correct: usize,
    pub early_stops: usize,
    pub questions: usize,
    pub traces: usize,
}

impl Summary {
    pub fn crowd_accuracy(&self) -> Option<f64> {
        (self.crowd > 0).then(|| self.crowd_correct as f64 / self.crowd as f64)
    }

    pub fn questions_per_trace(&self) -> Option<f64> {
        (self.traces > 0).then(|| self.questions as f64 / self.traces as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub seed: u64,
    pub rows: Vec<RequestRow>,
}

fn row_for<'a>(rows: &'a mut [RequestRow], by_id: &BTreeMap<String, usize>, id: &str) -> Result<&'a mut RequestRow, SimError> {
    by_id.get(id).map(|&i| &mut rows[i]).ok_or_else(|| SimError::Log(format!("unknown reference `{id}`")))
}

impl ScenarioReport {
    /// Replays the log. Requests are matched to the world by submission order.
    pub fn from_events(world: &World, events: &[Event]) -> Result<Self, SimError> {
        let mut rows: Vec<RequestRow> = Vec::new();
        let mut by_request = BTreeMap::new();
        let mut by_task = BTreeMap::new();
        for e in events {
            match &e.kind {
                EventKind::RequestSubmitted { request, candidates } => {
                    by_request.insert(request.clone(), rows.len());
                    rows.push(RequestRow::new(rows.len(), request.clone(), world, *candidates));
                }
                EventKind::TruthReused { request, resolved, .. } => {
                    row_for(&mut rows, &by_request, request)?.resolve(world, Method::TruthReuse, resolved.clone());
                }
                EventKind::AutoResolved { request, resolved, .. } => {
                    row_for(&mut rows, &by_request, request)?.resolve(world, Method::AutoEval, resolved.clone());
                }
                EventKind::RequestFailed { request, .. } => row_for(&mut rows, &by_request, request)?.outcome = Outcome::Failed,
                EventKind::TaskCreated { task, request, selected, tree_depth, .. } => {
                    let i = *by_request.get(request).ok_or_else(|| SimError::Log(format!("unknown request `{request}`")))?;
                    by_task.insert(task.clone(), i);
                    let row = &mut rows[i];
                    row.task = Some(task.clone());
                    row.selected = selected.len();
                    row.tree_depth = Some(*tree_depth);
                }
                EventKind::WorkersAssigned { task, workers, .. } => {
                    row_for(&mut rows, &by_task, task)?.questions.extend(workers.iter().map(|w| (w.clone(), 0)));
                }
                EventKind::AnswerRecorded { task, worker, .. } => {
                    let row = row_for(&mut rows, &by_task, task)?;
                    let slot = row.questions.iter_mut().find(|(w, _)| w == worker).ok_or_else(|| SimError::Log(format!("{worker} not assigned to {task}")))?;
                    slot.1 += 1;
                }
                EventKind::TraceCompleted { task, .. } => row_for(&mut rows, &by_task, task)?.completed += 1,
                EventKind::TaskResolved { task, resolved, early_stop, .. } => {
                    let row = row_for(&mut rows, &by_task, task)?;
                    row.early_stop = *early_stop;
                    row.resolve(world, Method::Crowd, resolved.clone());
                }
                EventKind::TaskExpired { task, .. } => row_for(&mut rows, &by_task, task)?.outcome = Outcome::Expired,
                EventKind::KnowledgeUpdated { .. }
                | EventKind::NoWorkers { .. }
                | EventKind::EarlyStop { .. }
                | EventKind::TruthStored { .. }
                | EventKind::RewardGranted { .. } => {}
            }
        }
        Ok(Self { seed: world.seed, rows })
    }

    /// Builds the same report from stored requests and tasks.
    pub fn from_state(world: &World, requests: &[RequestRecord], tasks: &[Task]) -> Self {
        let tasks: BTreeMap<&str, &Task> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
        let mut requests: Vec<&RequestRecord> = requests.iter().collect();
        requests.sort_by(|a, b| a.id.cmp(&b.id));
        let rows = requests
            .into_iter()
            .enumerate()
            .map(|(i, rec)| {
                let n = world.requests.get(i).map_or(0, |r| r.candidates.len());
                let mut row = RequestRow::new(i, rec.id.clone(), world, n);
                let task_id = match &rec.status {
                    RequestStatus::Pending { task } | RequestStatus::Expired { task } => Some(task.clone()),
                    RequestStatus::Resolved { task, .. } => task.clone(),
                    RequestStatus::Failed { .. } => None,
                };
                if let Some(t) = task_id.as_deref().and_then(|id| tasks.get(id)) {
                    row.task = Some(t.id.clone());
                    row.candidates = t.candidates.len();
                    row.selected = t.selected.len();
                    row.tree_depth = Some(t.tree.depth());
                    row.questions = t.assignments.iter().map(|a| (a.worker.clone(), a.trace.len())).collect();
                    row.completed = t.completed();
                    row.early_stop = t.resolution.as_ref().is_some_and(|r| r.early_stop);
                }
                match &rec.status {
                    RequestStatus::Pending { .. } => {}
                    RequestStatus::Resolved { route, method, .. } => row.resolve(world, *method, route.clone()),
                    RequestStatus::Expired { .. } => row.outcome = Outcome::Expired,
                    RequestStatus::Failed { .. } => row.outcome = Outcome::Failed,
                }
                row
            })
            .collect();
        Self { seed: world.seed, rows }
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary { requests: self.rows.len(), ..Summary::default() };
        for r in &self.rows {
            match (r.outcome, r.method) {
                (Outcome::Resolved, Some(Method::TruthReuse)) => s.truth_reuse += 1,
                (Outcome::Resolved, Some(Method::AutoEval)) => s.auto_eval += 1,
                (Outcome::Resolved, Some(Method::Crowd)) => {
                    s.crowd += 1;
                    s.crowd_correct += usize::from(r.correct == Some(true));
                }
                (Outcome::Expired, _) => s.expired += 1,
                (Outcome::Failed, _) => s.failed += 1,
                _ => s.pending += 1,
            }
            s.resolved_correct += usize::from(r.correct == Some(true));
            s.early_stops += usize::from(r.early_stop);
            s.questions += r.total_questions();
            s.traces += r.completed;
        }
        s
    }

    /// One delimited row per request.
    pub fn write_rows<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "index", "request", "repeat_of", "outcome", "method", "task", "candidates", "selected", "tree_depth", "workers", "questions",
            "completed", "early_stop", "correct", "route",
        ])?;
        for r in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_default();
            let method = r.method.map(|m| match m {
                Method::TruthReuse => "truth_reuse".to_owned(),
                Method::AutoEval => "auto_eval".to_owned(),
                Method::Crowd => "crowd".to_owned(),
            });
            let outcome = match r.outcome {
                Outcome::Pending => "pending",
                Outcome::Resolved => "resolved",
                Outcome::Expired => "expired",
                Outcome::Failed => "failed",
            };
            let questions: Vec<String> = r.questions.iter().map(|(w, q)| format!("{w}:{q}")).collect();
            let route = r.resolved.as_ref().map(|route| route.ids().iter().map(|id| id.as_str()).collect::<Vec<_>>().join(";"));
            out.write_record([
                r.index.to_string(),
                r.request.clone(),
                opt(r.repeat_of.map(|i| i.to_string())),
                outcome.to_owned(),
                opt(method),
                opt(r.task.clone()),
                r.candidates.to_string(),
                r.selected.to_string(),
                opt(r.tree_depth.map(|d| d.to_string())),
                r.questions.len().to_string(),
                questions.join(";"),
                r.completed.to_string(),
                r.early_stop.to_string(),
                opt(r.correct.map(|c| c.to_string())),
                opt(route),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `metric,value` pairs.
    pub fn write_summary<W: Write>(&self, w: W) -> Result<(), SimError> {
        let s = self.summary();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "value"])?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for (k, v) in [
            ("seed", self.seed.to_string()),
            ("requests", s.requests.to_string()),
            ("truth_reuse", s.truth_reuse.to_string()),
            ("auto_eval", s.auto_eval.to_string()),
            ("crowd", s.crowd.to_string()),
            ("expired", s.expired.to_string()),
            ("failed", s.failed.to_string()),
            ("pending", s.pending.to_string()),
            ("crowd_correct", s.crowd_correct.to_string()),
            ("crowd_accuracy", fmt(s.crowd_accuracy())),
            ("resolved_correct", s.resolved_correct.to_string()),
            ("early_stops", s.early_stops.to_string()),
            ("questions", s.questions.to_string()),
            ("traces", s.traces.to_string()),
            ("questions_per_trace", fmt(s.questions_per_trace())),
        ] {
            out.write_record([k, v.as_str()])?;
        }
        out.flush()?;
        Ok(())
    }
}
