//! The request pipeline and task lifecycle.
//!
//! A request is answered from a stored truth if one matches, else from the
//! candidates themselves if they agree or match an older truth, else it
//! becomes a crowd task: landmarks are selected, ordered into a question
//! tree and sent to the best-suited workers, whose answers are collected
//! until an early stop, completion or the deadline.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use log::{debug, info};
use parking_lot::Mutex;
use routecrowd_core::assign::{top_k_workers, WorkerStatus};
use routecrowd_core::error::AssignError;
use routecrowd_core::familiarity::{
    accumulate, build_matrix, predict_matrix, train_pmf, AccumulatedMatrix, LatentFactors, TrainReport, WorkerId, WorkerProfile,
};
use routecrowd_core::landmark::normalize_significance;
use routecrowd_core::question::{build_tree, Answer, AnswerTrace, NextStep};
use routecrowd_core::route::calibrate;
use routecrowd_core::select::{select, SelectOptions};
use routecrowd_core::significance::{build_visit_graph, infer_significance, SignificanceScores, VisitEvent};
use routecrowd_core::{CandidateSet, Landmark, LandmarkId, LandmarkIndex, RawRoute};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::evaluate::{evaluate_candidates, Evaluation};
use crate::events::{Event, EventKind};
use crate::request::{Method, RequestRecord, RequestStatus, RouteRequest};
use crate::store::{MemoryStore, Op, Store, Table};
use crate::task::{early_stop_check, early_stop_threshold, plurality, reward_for, Assignment, Resolution, Task, TaskState};
use crate::truth::{reuse_truth, ttl_secs, TruthKey, TruthRecord};

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
struct Counters {
    requests: u64,
    tasks: u64,
    truths: u64,
}

struct Knowledge {
    index: LandmarkIndex,
    workers: BTreeMap<WorkerId, WorkerProfile>,
    accumulated: Option<AccumulatedMatrix>,
    counters: Counters,
}

/// Pending writes of one operation.
struct Txn {
    now: DateTime<Utc>,
    ops: Vec<Op>,
    touched: BTreeSet<WorkerId>,
}

impl Txn {
    fn new(now: DateTime<Utc>) -> Self {
        Self { now, ops: Vec::new(), touched: BTreeSet::new() }
    }

    fn event(&mut self, kind: EventKind) {
        self.ops.push(Op::Event { at: self.now, kind });
    }

    fn put(&mut self, table: Table, key: &str, value: &impl Serialize) -> Result<(), ServiceError> {
        self.ops.push(Op::put(table, key, value)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub task: String,
    pub worker: WorkerId,
    pub next: NextStep,
    pub answered: usize,
    pub state: TaskState,
}

/// What a worker sees: the next landmark and the trip it is about, never the
/// candidate routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub task: String,
    pub worker: WorkerId,
    pub next: NextStep,
    pub landmark: Option<Landmark>,
    pub answered: usize,
    pub departure: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    pub state: TaskState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentView {
    pub task: String,
    pub state: TaskState,
    pub answered: usize,
    pub complete: bool,
    pub deadline: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickReport {
    pub resolved: Vec<String>,
    pub expired: Vec<String>,
    pub assigned: Vec<String>,
}

pub struct Engine {
    cfg: ServiceConfig,
    clock: Arc<dyn Clock>,
    store: Arc<dyn Store>,
    // One lock serializes all mutations: per-task writes and the worker
    // quota check-and-increment both happen under it.
    state: Mutex<Knowledge>,
}

fn hours(d: Duration) -> f64 {
    d.num_milliseconds() as f64 / 3_600_000.0
}

fn load<T: for<'de> Deserialize<'de>>(store: &dyn Store, table: Table, key: &str) -> Result<Option<T>, ServiceError> {
    store.get(table, key)?.map(|v| serde_json::from_str(&v).map_err(ServiceError::from)).transpose()
}

fn load_all<T: for<'de> Deserialize<'de>>(store: &dyn Store, table: Table) -> Result<Vec<T>, ServiceError> {
    store.scan(table)?.into_iter().map(|(_, v)| serde_json::from_str(&v).map_err(ServiceError::from)).collect()
}

impl Engine {
    /// Opens an engine over `store`, reloading everything persisted earlier.
    pub fn open(cfg: ServiceConfig, store: Arc<dyn Store>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        cfg.validate()?;
        let landmarks: Vec<Landmark> = load(&*store, Table::Knowledge, "landmarks")?.unwrap_or_default();
        let index = LandmarkIndex::new(landmarks)?;
        let workers = load_all::<WorkerProfile>(&*store, Table::Workers)?.into_iter().map(|w| (w.id.clone(), w)).collect();
        let accumulated = load(&*store, Table::Knowledge, "accumulated")?;
        let counters = load(&*store, Table::Meta, "counters")?.unwrap_or_default();
        Ok(Self { cfg, clock, store, state: Mutex::new(Knowledge { index, workers, accumulated, counters }) })
    }

    pub fn in_memory(cfg: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        Self::open(cfg, Arc::new(MemoryStore::new()), clock)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn commit(&self, k: &mut Knowledge, mut txn: Txn) -> Result<(), ServiceError> {
        for id in &txn.touched {
            if let Some(w) = k.workers.get(id) {
                txn.ops.push(Op::put(Table::Workers, id.as_str(), w)?);
            }
        }
        txn.ops.push(Op::put(Table::Meta, "counters", &k.counters)?);
        let result = self.store.commit(txn.ops);
        if result.is_err() {
            // Drop cached changes that never reached the store.
            k.workers = load_all::<WorkerProfile>(&*self.store, Table::Workers)?.into_iter().map(|w| (w.id.clone(), w)).collect();
            k.counters = load(&*self.store, Table::Meta, "counters")?.unwrap_or_default();
        }
        result
    }

    // ----- ingestion -----

    /// Replaces the landmark set. Significances are min-max normalized.
    pub fn ingest_landmarks(&self, mut landmarks: Vec<Landmark>) -> Result<usize, ServiceError> {
        normalize_significance(&mut landmarks);
        let index = LandmarkIndex::new(landmarks.clone())?;
        let mut k = self.state.lock();
        let mut txn = Txn::new(self.now());
        txn.put(Table::Knowledge, "landmarks", &landmarks)?;
        txn.event(EventKind::KnowledgeUpdated { what: format!("{} landmarks", landmarks.len()) });
        self.commit(&mut k, txn)?;
        k.index = index;
        Ok(landmarks.len())
    }

    /// Infers significances from visits and applies them to the landmark set.
    pub fn ingest_checkins(&self, events: &[VisitEvent]) -> Result<SignificanceScores, ServiceError> {
        let mut k = self.state.lock();
        let graph = build_visit_graph(events, |id| k.index.get(id).is_some())?;
        let out = infer_significance(&graph, self.cfg.significance.max_iters, self.cfg.significance.tol)?;
        info!("significance converged after {} iterations", out.iterations);
        let index = k.index.clone().with_significance(&out.scores);
        let mut txn = Txn::new(self.now());
        txn.put(Table::Knowledge, "landmarks", &index.landmarks())?;
        txn.event(EventKind::KnowledgeUpdated { what: format!("significance from {} visits", events.len()) });
        self.commit(&mut k, txn)?;
        k.index = index;
        Ok(out.scores)
    }

    /// Adds or replaces worker profiles. Outstanding task counts of known
    /// workers are kept: they are service state, not profile data.
    pub fn ingest_workers(&self, profiles: Vec<WorkerProfile>) -> Result<usize, ServiceError> {
        let mut k = self.state.lock();
        let mut txn = Txn::new(self.now());
        let n = profiles.len();
        for mut p in profiles {
            if let Some(old) = k.workers.get(&p.id) {
                p.outstanding_tasks = old.outstanding_tasks;
            }
            txn.touched.insert(p.id.clone());
            k.workers.insert(p.id.clone(), p);
        }
        txn.event(EventKind::KnowledgeUpdated { what: format!("{n} worker profiles") });
        self.commit(&mut k, txn)?;
        Ok(n)
    }

    /// Rebuilds the familiarity matrix, completes it and accumulates it.
    /// Returns `None` when no worker knows any landmark.
    pub fn retrain(&self) -> Result<Option<TrainReport>, ServiceError> {
        let mut k = self.state.lock();
        if k.index.is_empty() {
            return Err(ServiceError::NoLandmarks);
        }
        let workers: Vec<WorkerProfile> = k.workers.values().cloned().collect();
        let m = build_matrix(&workers, &k.index, &self.cfg.familiarity);
        let mut txn = Txn::new(self.now());
        let (acc, report) = if m.nnz() == 0 {
            (m, None)
        } else {
            let (factors, report) = train_pmf(&m, self.cfg.pmf)?;
            info!("pmf: {} iterations, objective {:.6}", report.iterations, report.final_objective);
            let completed = predict_matrix(&m, &factors)?;
            txn.put(Table::Knowledge, "factors", &factors)?;
            (accumulate(&completed, &k.index, self.cfg.familiarity.eta_dis_km)?, Some(report))
        };
        txn.put(Table::Knowledge, "accumulated", &acc)?;
        txn.event(EventKind::KnowledgeUpdated { what: format!("familiarity for {} workers", workers.len()) });
        self.commit(&mut k, txn)?;
        k.accumulated = Some(acc);
        Ok(report)
    }

    /// Snaps raw candidate routes to landmark routes.
    pub fn calibrate_candidates(&self, raw: &[(String, RawRoute)]) -> Result<CandidateSet, ServiceError> {
        let k = self.state.lock();
        let routes = raw
            .iter()
            .map(|(src, r)| Ok((calibrate(r, &k.index, self.cfg.selection.snap_radius_km)?, src.clone())))
            .collect::<Result<Vec<_>, ServiceError>>()?;
        Ok(CandidateSet::new(routes)?)
    }

    // ----- pipeline -----

    pub fn submit_request(&self, request: RouteRequest, candidates: CandidateSet) -> Result<RequestRecord, ServiceError> {
        request.validate()?;
        let mut k = self.state.lock();
        let now = self.now();
        let mut txn = Txn::new(now);
        k.counters.requests += 1;
        let id = format!("req-{:06}", k.counters.requests);
        txn.event(EventKind::RequestSubmitted { request: id.clone(), candidates: candidates.len() });

        let key = TruthKey::new(&request.source, &request.destination, &request.departure, &self.cfg.truth);
        let truths: Vec<TruthRecord> = load_all(&*self.store, Table::Truths)?;
        let status = if let Some(t) = reuse_truth(&key, &truths, &now) {
            txn.event(EventKind::TruthReused { request: id.clone(), truth: t.id.clone(), resolved: t.best_route.clone() });
            RequestStatus::Resolved { route: t.best_route.clone(), method: Method::TruthReuse, confidence: t.confidence, task: None }
        } else {
            // Stale truths for the same trip still count as evidence here.
            let known = truths.iter().filter(|t| t.key == key).map(|t| &t.best_route);
            match evaluate_candidates(&candidates, known, self.cfg.evaluation.eta, self.cfg.evaluation.tau_agree) {
                Evaluation::Resolved { route, confidence, rule } => {
                    let resolved = candidates.routes()[route].route.clone();
                    txn.event(EventKind::AutoResolved { request: id.clone(), route, rule, confidence, resolved: resolved.clone() });
                    RequestStatus::Resolved {
                        route: resolved,
                        method: Method::AutoEval,
                        confidence,
                        task: None,
                    }
                }
                Evaluation::Escalate { confidences } => {
                    debug!("{id} escalated, confidences {confidences:?}");
                    self.create_task(&mut k, &mut txn, &id, &request, candidates)?
                }
            }
        };
        let record = RequestRecord { id: id.clone(), request, submitted_at: now, status };
        txn.put(Table::Requests, &id, &record)?;
        self.commit(&mut k, txn)?;
        Ok(record)
    }

    fn create_task(
        &self,
        k: &mut Knowledge,
        txn: &mut Txn,
        request_id: &str,
        request: &RouteRequest,
        candidates: CandidateSet,
    ) -> Result<RequestStatus, ServiceError> {
        let opts = SelectOptions { relax_min_size: self.cfg.selection.relax_min_size };
        let planned = select(&candidates, &k.index, self.cfg.selection.algorithm, opts)
            .map_err(ServiceError::from)
            .and_then(|sel| Ok((build_tree(&sel.chosen, &candidates, &k.index)?, sel)));
        let (tree, sel) = match planned {
            Ok(p) => p,
            Err(e) => {
                let reason = e.to_string();
                txn.event(EventKind::RequestFailed { request: request_id.into(), reason: reason.clone() });
                return Ok(RequestStatus::Failed { reason });
            }
        };
        k.counters.tasks += 1;
        let id = format!("task-{:06}", k.counters.tasks);
        let deadline = txn.now + Duration::milliseconds((request.deadline_hours * 3_600_000.0).round() as i64);
        let mut task = Task {
            id: id.clone(),
            request_id: request_id.into(),
            request: request.clone(),
            selected: sel.chosen.iter().cloned().collect(),
            tree,
            candidates,
            assignments: Vec::new(),
            state: TaskState::Created,
            resolution: None,
            created_at: txn.now,
            deadline,
            retry_at: None,
            shortfall: false,
        };
        txn.event(EventKind::TaskCreated {
            task: id.clone(),
            request: request_id.into(),
            selected: task.selected.clone(),
            tree_depth: task.tree.depth(),
            candidates: task.candidates.len(),
        });
        self.assign(k, txn, &mut task)?;
        txn.put(Table::Tasks, &id, &task)?;
        Ok(RequestStatus::Pending { task: id })
    }

    /// Picks workers for a task in `Created`, or schedules a retry.
    fn assign(&self, k: &mut Knowledge, txn: &mut Txn, task: &mut Task) -> Result<(), ServiceError> {
        let taken: BTreeSet<&WorkerId> = task.assignments.iter().map(|a| &a.worker).collect();
        let statuses: Vec<WorkerStatus> = k
            .workers
            .values()
            .filter(|w| !taken.contains(&w.id))
            .map(|w| WorkerStatus::from_profile(w, self.cfg.assignment.default_lambda))
            .collect();
        let remaining = hours(task.deadline - txn.now).max(0.0);
        let picked = match &k.accumulated {
            None => Err(AssignError::NoCandidates),
            Some(acc) => top_k_workers(&task.selected, acc, &statuses, &self.cfg.assignment.eligibility(), remaining, self.cfg.assignment.k),
        };
        match picked {
            Ok(sel) => {
                let workers: Vec<WorkerId> = sel.ranked.iter().map(|(w, _)| w.clone()).collect();
                for w in &workers {
                    task.assignments.push(Assignment::new(w.clone(), txn.now));
                    k.workers.get_mut(w).expect("known worker").outstanding_tasks += 1;
                    txn.touched.insert(w.clone());
                }
                task.shortfall = sel.shortfall;
                task.retry_at = None;
                task.advance(TaskState::Assigned)?;
                txn.event(EventKind::WorkersAssigned { task: task.id.clone(), workers, shortfall: sel.shortfall });
                Ok(())
            }
            Err(AssignError::NoCandidates) => {
                let retry_at = txn.now + Duration::seconds(self.cfg.assignment.retry_backoff_secs);
                task.retry_at = Some(retry_at);
                txn.event(EventKind::NoWorkers { task: task.id.clone(), retry_at });
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn record_answer(&self, task_id: &str, worker: &WorkerId, landmark: &LandmarkId, yes: bool) -> Result<AnswerOutcome, ServiceError> {
        let mut k = self.state.lock();
        let mut task = self.task(task_id)?;
        if task.state.is_closed() {
            return Err(ServiceError::TaskClosed(task.id));
        }
        let idx = task
            .assignments
            .iter()
            .position(|a| &a.worker == worker)
            .ok_or_else(|| ServiceError::NotAssigned { task: task.id.clone(), worker: worker.to_string() })?;
        if task.assignments[idx].trace.iter().any(|a| &a.landmark == landmark) {
            // Already answered: the first answer stands.
            return self.outcome(&task, idx);
        }
        match task.tree.next_question(&task.assignments[idx].trace)? {
            NextStep::Ask { landmark: expected } if &expected == landmark => {}
            NextStep::Ask { landmark: expected } => return Err(ServiceError::WrongQuestion { expected: Some(expected), got: landmark.clone() }),
            NextStep::Resolved { .. } => return Err(ServiceError::WrongQuestion { expected: None, got: landmark.clone() }),
        }
        let mut txn = Txn::new(self.now());
        task.assignments[idx].trace.push(Answer { landmark: landmark.clone(), yes });
        if task.state == TaskState::Assigned {
            task.advance(TaskState::Collecting)?;
        }
        txn.event(EventKind::AnswerRecorded { task: task.id.clone(), worker: worker.clone(), landmark: landmark.clone(), yes });

        if let NextStep::Resolved { route } = task.tree.next_question(&task.assignments[idx].trace)? {
            let order = task.completed();
            let a = &mut task.assignments[idx];
            a.leaf = Some(route);
            a.completed_at = Some(txn.now);
            a.completion_order = Some(order);
            let took = hours(txn.now - a.assigned_at);
            let questions = a.trace.len();
            if let Some(p) = k.workers.get_mut(worker) {
                p.outstanding_tasks = p.outstanding_tasks.saturating_sub(1);
                if took > 0.0 {
                    p.response_hours.push(took);
                }
                txn.touched.insert(worker.clone());
            }
            txn.event(EventKind::TraceCompleted { task: task.id.clone(), worker: worker.clone(), route, questions });

            let all_done = task.completed() == task.assignments.len();
            if !all_done && early_stop_check(&task, &self.cfg.early_stop).is_some() {
                self.resolve(&mut k, &mut txn, &mut task, true)?;
            } else if all_done {
                self.resolve(&mut k, &mut txn, &mut task, false)?;
            }
        }
        txn.put(Table::Tasks, &task.id, &task)?;
        self.commit(&mut k, txn)?;
        self.outcome(&task, idx)
    }

    fn outcome(&self, task: &Task, idx: usize) -> Result<AnswerOutcome, ServiceError> {
        let a = &task.assignments[idx];
        Ok(AnswerOutcome {
            task: task.id.clone(),
            worker: a.worker.clone(),
            next: task.tree.next_question(&a.trace)?,
            answered: a.trace.len(),
            state: task.state,
        })
    }

    /// Closes a task on its plurality route: stores a truth if confident
    /// enough, updates answer histories and grants rewards.
    fn resolve(&self, k: &mut Knowledge, txn: &mut Txn, task: &mut Task, early: bool) -> Result<(), ServiceError> {
        let (route, votes, completed) = plurality(task).expect("resolve needs a completed trace");
        let confidence = votes as f64 / completed as f64;
        if early {
            let threshold = early_stop_threshold(task.assignments.len(), &self.cfg.early_stop);
            txn.event(EventKind::EarlyStop { task: task.id.clone(), route, votes, threshold, completed });
        }
        task.resolution = Some(Resolution { route, method: Method::Crowd, confidence, early_stop: early });
        task.advance(TaskState::Resolved)?;
        let chosen = task.candidates.routes()[route].route.clone();
        let membership = chosen.membership();

        for a in &task.assignments {
            let Some(p) = k.workers.get_mut(&a.worker) else { continue };
            if a.leaf.is_none() {
                p.outstanding_tasks = p.outstanding_tasks.saturating_sub(1);
            }
            for ans in &a.trace {
                let h = p.history.entry(ans.landmark.clone()).or_default();
                if ans.yes == membership.contains(&ans.landmark) {
                    h.correct += 1;
                } else {
                    h.wrong += 1;
                }
            }
            txn.touched.insert(a.worker.clone());

            let points = reward_for(a, route, &self.cfg.rewards);
            if points > 0 {
                let balance: u64 = load(&*self.store, Table::Rewards, a.worker.as_str())?.unwrap_or(0);
                txn.put(Table::Rewards, a.worker.as_str(), &(balance + points))?;
                txn.event(EventKind::RewardGranted { task: task.id.clone(), worker: a.worker.clone(), points });
            }
        }

        let task_ref = Some(task.id.clone());
        if confidence >= self.cfg.evaluation.eta {
            k.counters.truths += 1;
            let truth = TruthRecord {
                id: format!("truth-{:06}", k.counters.truths),
                key: TruthKey::new(&task.request.source, &task.request.destination, &task.request.departure, &self.cfg.truth),
                best_route: chosen.clone(),
                confidence,
                created_at: txn.now,
                ttl_secs: ttl_secs(&self.cfg.truth),
                task: task.id.clone(),
            };
            txn.event(EventKind::TruthStored { truth: truth.id.clone(), task: task.id.clone(), confidence });
            txn.put(Table::Truths, &truth.id.clone(), &truth)?;
        }
        self.set_request_status(txn, &task.request_id, RequestStatus::Resolved { route: chosen.clone(), method: Method::Crowd, confidence, task: task_ref })?;
        txn.event(EventKind::TaskResolved {
            resolved: chosen,
            task: task.id.clone(),
            request: task.request_id.clone(),
            route,
            votes,
            completed,
            confidence,
            early_stop: early,
        });
        Ok(())
    }

    fn set_request_status(&self, txn: &mut Txn, id: &str, status: RequestStatus) -> Result<(), ServiceError> {
        let mut record = self.request(id)?;
        record.status = status;
        txn.put(Table::Requests, id, &record)
    }

    /// Handles deadlines and retries of unassigned tasks.
    pub fn tick(&self) -> Result<TickReport, ServiceError> {
        let mut k = self.state.lock();
        let now = self.now();
        let mut report = TickReport::default();
        for mut task in self.tasks()? {
            if task.state.is_closed() {
                continue;
            }
            let mut txn = Txn::new(now);
            if now >= task.deadline {
                if task.completed() > 0 {
                    self.resolve(&mut k, &mut txn, &mut task, false)?;
                    report.resolved.push(task.id.clone());
                } else {
                    task.advance(TaskState::Expired)?;
                    for a in &task.assignments {
                        if let Some(p) = k.workers.get_mut(&a.worker) {
                            p.outstanding_tasks = p.outstanding_tasks.saturating_sub(1);
                            txn.touched.insert(a.worker.clone());
                        }
                    }
                    self.set_request_status(&mut txn, &task.request_id, RequestStatus::Expired { task: task.id.clone() })?;
                    txn.event(EventKind::TaskExpired { task: task.id.clone(), request: task.request_id.clone() });
                    report.expired.push(task.id.clone());
                }
            } else if task.state == TaskState::Created && task.retry_at.is_some_and(|t| t <= now) {
                self.assign(&mut k, &mut txn, &mut task)?;
                if task.state == TaskState::Assigned {
                    report.assigned.push(task.id.clone());
                }
            } else {
                continue;
            }
            txn.put(Table::Tasks, &task.id, &task)?;
            self.commit(&mut k, txn)?;
        }
        Ok(report)
    }

    // ----- queries -----

    pub fn request(&self, id: &str) -> Result<RequestRecord, ServiceError> {
        load(&*self.store, Table::Requests, id)?.ok_or_else(|| ServiceError::NotFound(format!("request `{id}`")))
    }

    pub fn requests(&self) -> Result<Vec<RequestRecord>, ServiceError> {
        load_all(&*self.store, Table::Requests)
    }

    pub fn task(&self, id: &str) -> Result<Task, ServiceError> {
        load(&*self.store, Table::Tasks, id)?.ok_or_else(|| ServiceError::NotFound(format!("task `{id}`")))
    }

    pub fn tasks(&self) -> Result<Vec<Task>, ServiceError> {
        load_all(&*self.store, Table::Tasks)
    }

    pub fn truths(&self) -> Result<Vec<TruthRecord>, ServiceError> {
        load_all(&*self.store, Table::Truths)
    }

    pub fn reward_balance(&self, worker: &WorkerId) -> Result<u64, ServiceError> {
        Ok(load(&*self.store, Table::Rewards, worker.as_str())?.unwrap_or(0))
    }

    pub fn worker(&self, id: &WorkerId) -> Result<WorkerProfile, ServiceError> {
        self.state.lock().workers.get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("worker `{id}`")))
    }

    pub fn workers(&self) -> Vec<WorkerProfile> {
        self.state.lock().workers.values().cloned().collect()
    }

    pub fn landmarks(&self) -> Vec<Landmark> {
        self.state.lock().index.landmarks().to_vec()
    }

    pub fn accumulated(&self) -> Option<AccumulatedMatrix> {
        self.state.lock().accumulated.clone()
    }

    pub fn factors(&self) -> Result<Option<LatentFactors>, ServiceError> {
        load(&*self.store, Table::Knowledge, "factors")
    }

    pub fn events(&self, from: u64) -> Result<Vec<Event>, ServiceError> {
        self.store.events(from)
    }

    /// Open tasks the worker is assigned to.
    pub fn assignments_for(&self, worker: &WorkerId) -> Result<Vec<AssignmentView>, ServiceError> {
        Ok(self
            .tasks()?
            .into_iter()
            .filter(|t| !t.state.is_closed())
            .filter_map(|t| {
                let a = t.assignment(worker)?;
                Some(AssignmentView { task: t.id.clone(), state: t.state, answered: a.trace.len(), complete: a.is_complete(), deadline: t.deadline })
            })
            .collect())
    }

    pub fn next_question(&self, task_id: &str, worker: &WorkerId) -> Result<QuestionView, ServiceError> {
        let task = self.task(task_id)?;
        if task.state.is_closed() {
            return Err(ServiceError::TaskClosed(task.id));
        }
        let a = task.assignment(worker).ok_or_else(|| ServiceError::NotAssigned { task: task.id.clone(), worker: worker.to_string() })?;
        let next = task.tree.next_question(&a.trace)?;
        let landmark = match &next {
            NextStep::Ask { landmark } => self.state.lock().index.get(landmark).cloned(),
            NextStep::Resolved { .. } => None,
        };
        Ok(QuestionView {
            task: task.id.clone(),
            worker: worker.clone(),
            next,
            landmark,
            answered: a.trace.len(),
            departure: task.request.departure,
            deadline: task.deadline,
            state: task.state,
        })
    }

    /// The trace a worker has submitted so far.
    pub fn trace(&self, task_id: &str, worker: &WorkerId) -> Result<AnswerTrace, ServiceError> {
        let task = self.task(task_id)?;
        let a = task.assignment(worker).ok_or_else(|| ServiceError::NotAssigned { task: task.id.clone(), worker: worker.to_string() })?;
        Ok(a.trace.clone())
    }
}
