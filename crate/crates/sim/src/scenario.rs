//! Discrete-event driver: requests, worker sessions and deadline ticks are
//! replayed in (time, sequence) order against an in-process engine.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use routecrowd_core::familiarity::{AccumulatedMatrix, WorkerId};
use routecrowd_core::question::NextStep;
use routecrowd_service::events::Event;
use routecrowd_service::{Engine, ManualClock, RequestRecord, RequestStatus, ServiceConfig, Task, TaskState};

use crate::behavior::BehaviorModel;
use crate::error::SimError;
use crate::report::ScenarioReport;
use crate::world::World;

const BEHAVIOR_STREAM: u64 = 0x5eed_b3a5;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Action {
    Submit(usize),
    Session { task: String, worker: WorkerId },
    Tick,
}

pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub events: Vec<Event>,
    pub requests: Vec<RequestRecord>,
    pub tasks: Vec<Task>,
    pub engine: Engine,
}

struct Queue {
    heap: BinaryHeap<Reverse<(DateTime<Utc>, u64)>>,
    actions: Vec<Action>,
}

impl Queue {
    fn push(&mut self, at: DateTime<Utc>, action: Action) {
        self.heap.push(Reverse((at, self.actions.len() as u64)));
        self.actions.push(action);
    }

    fn pop(&mut self) -> Option<(DateTime<Utc>, Action)> {
        let Reverse((at, seq)) = self.heap.pop()?;
        Some((at, self.actions[seq as usize].clone()))
    }
}

struct Sim<'a> {
    world: &'a World,
    behavior: &'a BehaviorModel,
    engine: Engine,
    clock: ManualClock,
    familiarity: Option<AccumulatedMatrix>,
    rng: ChaCha8Rng,
    queue: Queue,
    scheduled: BTreeSet<(String, WorkerId)>,
}

/// Runs every request of `world` through the pipeline with simulated workers.
pub fn run_scenario(world: &World, behavior: &BehaviorModel, cfg: &ServiceConfig) -> Result<ScenarioRun, SimError> {
    behavior.validate()?;
    let clock = ManualClock::new(world.start);
    let engine = Engine::in_memory(cfg.clone(), Arc::new(clock.clone()))?;
    engine.ingest_landmarks(world.landmarks.clone())?;
    engine.ingest_checkins(&world.checkins)?;
    engine.ingest_workers(world.workers.iter().map(|w| w.profile.clone()).collect())?;
    engine.retrain()?;

    let mut sim = Sim {
        world,
        behavior,
        familiarity: engine.accumulated(),
        engine,
        clock,
        rng: ChaCha8Rng::seed_from_u64(world.seed ^ BEHAVIOR_STREAM),
        queue: Queue { heap: BinaryHeap::new(), actions: Vec::new() },
        scheduled: BTreeSet::new(),
    };
    for r in &world.requests {
        sim.queue.push(r.submit_at, Action::Submit(r.index));
    }
    while let Some((at, action)) = sim.queue.pop() {
        sim.clock.set(at);
        match action {
            Action::Submit(i) => sim.submit(i)?,
            Action::Session { task, worker } => sim.session(&task, &worker)?,
            Action::Tick => sim.tick()?,
        }
    }

    let events = sim.engine.events(0)?;
    let report = ScenarioReport::from_events(world, &events)?;
    Ok(ScenarioRun { report, events, requests: sim.engine.requests()?, tasks: sim.engine.tasks()?, engine: sim.engine })
}

impl Sim<'_> {
    fn submit(&mut self, i: usize) -> Result<(), SimError> {
        let r = &self.world.requests[i];
        let record = self.engine.submit_request(r.request.clone(), r.candidates.clone())?;
        if let RequestStatus::Pending { task } = record.status {
            let task = self.engine.task(&task)?;
            self.queue.push(task.deadline, Action::Tick);
            self.follow(&task);
        }
        Ok(())
    }

    /// Schedules sessions for new assignees, or a retry tick.
    fn follow(&mut self, task: &Task) {
        if let (TaskState::Created, Some(at)) = (task.state, task.retry_at) {
            self.queue.push(at, Action::Tick);
        }
        for a in &task.assignments {
            if !self.scheduled.insert((task.id.clone(), a.worker.clone())) {
                continue;
            }
            let lambda = self.world.worker(&a.worker).map_or(self.engine.config().assignment.default_lambda, |w| w.lambda);
            let delay = self.behavior.delay_hours(lambda, &mut self.rng);
            let at = a.assigned_at + Duration::milliseconds((delay * 3_600_000.0).round() as i64);
            self.queue.push(at, Action::Session { task: task.id.clone(), worker: a.worker.clone() });
        }
    }

    fn tick(&mut self) -> Result<(), SimError> {
        self.engine.tick()?;
        for task in self.engine.tasks()? {
            if !task.state.is_closed() {
                self.follow(&task);
            }
        }
        Ok(())
    }

    /// One worker answers every question of the trace in one sitting.
    fn session(&mut self, task_id: &str, worker: &WorkerId) -> Result<(), SimError> {
        let task = self.engine.task(task_id)?;
        if task.state.is_closed() {
            return Ok(());
        }
        let truth = self.world.requests[self.request_index(&task)?].truth_route().membership();
        loop {
            let q = self.engine.next_question(task_id, worker)?;
            let NextStep::Ask { landmark } = q.next else { break };
            let f = self.familiarity.as_ref().map_or(0.0, |m| m.value(worker, &landmark));
            let yes = self.behavior.answer(truth.contains(&landmark), f, &mut self.rng);
            let out = self.engine.record_answer(task_id, worker, &landmark, yes)?;
            if out.state.is_closed() {
                break;
            }
        }
        Ok(())
    }

    fn request_index(&self, task: &Task) -> Result<usize, SimError> {
        // Requests get sequential ids in submission order.
        task.request_id
            .strip_prefix("req-")
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(|n| n.checked_sub(1))
            .filter(|&i| i < self.world.requests.len())
            .ok_or_else(|| SimError::Log(format!("unexpected request id `{}`", task.request_id)))
    }
}
