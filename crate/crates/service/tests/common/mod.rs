#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use routecrowd_core::familiarity::{WorkerId, WorkerProfile};
use routecrowd_core::{CandidateSet, GeoPoint, Landmark, LandmarkId, LandmarkRoute};
use routecrowd_service::store::Store;
use routecrowd_service::{Engine, ManualClock, RouteRequest, ServiceConfig};

pub const ORIGIN: GeoPoint = GeoPoint { lat: 31.2, lon: 121.45 };

pub fn start() -> DateTime<Utc> {
    // A Monday morning.
    Utc.with_ymd_and_hms(2024, 4, 1, 8, 0, 0).unwrap()
}

/// Five landmarks on a line, 400 m apart.
pub fn landmarks() -> Vec<Landmark> {
    ["a", "b", "c", "d", "e"]
        .iter()
        .enumerate()
        .map(|(i, id)| Landmark {
            id: (*id).into(),
            name: format!("Landmark {}", id.to_uppercase()),
            location: ORIGIN.offset_km(0.0, 0.4 * i as f64),
            significance: [0.9, 0.8, 0.5, 0.6, 0.3][i],
        })
        .collect()
}

pub fn worker(id: &str, near: f64) -> WorkerProfile {
    let p = ORIGIN.offset_km(0.0, near);
    WorkerProfile {
        id: id.into(),
        home: p,
        work: p,
        frequented: p,
        history: Default::default(),
        response_hours: vec![1.0],
        outstanding_tasks: 0,
    }
}

pub fn workers(n: usize) -> Vec<WorkerProfile> {
    (0..n).map(|i| worker(&format!("w{i}"), 0.3 * i as f64)).collect()
}

pub fn request(departure: DateTime<Utc>) -> RouteRequest {
    RouteRequest {
        source: ORIGIN,
        destination: ORIGIN.offset_km(0.0, 1.6),
        departure,
        deadline_hours: 2.0,
        requester: "alice".into(),
    }
}

pub fn route(ids: &[&str]) -> LandmarkRoute {
    LandmarkRoute::new(ids.iter().map(|&s| LandmarkId::from(s)).collect()).unwrap()
}

/// Two routes that differ in one landmark each: a one-question task.
pub fn two_routes() -> CandidateSet {
    CandidateSet::new([(route(&["a", "b", "c"]), "mpr"), (route(&["a", "d", "c"]), "ldr")]).unwrap()
}

/// Three routes needing up to two questions.
pub fn three_routes() -> CandidateSet {
    CandidateSet::new([(route(&["a", "b", "e"]), "mpr"), (route(&["a", "d", "e"]), "ldr"), (route(&["a", "c", "e"]), "mfp")]).unwrap()
}

pub fn config(k: usize) -> ServiceConfig {
    let mut cfg = ServiceConfig::default();
    cfg.assignment.k = k;
    cfg.assignment.max_outstanding = 10;
    cfg
}

pub fn engine_with(cfg: ServiceConfig, store: Arc<dyn Store>, n_workers: usize) -> (Engine, ManualClock) {
    let clock = ManualClock::new(start());
    let engine = Engine::open(cfg, store, Arc::new(clock.clone())).unwrap();
    engine.ingest_landmarks(landmarks()).unwrap();
    engine.ingest_workers(workers(n_workers)).unwrap();
    engine.retrain().unwrap();
    (engine, clock)
}

pub fn engine(k: usize, n_workers: usize) -> (Engine, ManualClock) {
    engine_with(config(k), Arc::new(routecrowd_service::store::MemoryStore::new()), n_workers)
}

pub fn wid(s: &str) -> WorkerId {
    WorkerId::from(s)
}
