//! Seeded synthetic worlds: a landmark grid, check-ins, workers and
//! requests whose candidates are lattice paths across the grid.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use routecrowd_core::familiarity::{AnswerHistory, WorkerId, WorkerProfile};
use routecrowd_core::significance::VisitEvent;
use routecrowd_core::{CandidateSet, GeoPoint, Landmark, LandmarkId, LandmarkRoute};
use routecrowd_service::RouteRequest;
use serde::{Deserialize, Serialize};

use crate::error::SimError;

pub const MAX_LANDMARKS: usize = 500;
pub const MAX_WORKERS: usize = 200;
pub const MAX_REQUESTS: usize = 50;

/// Distance between neighbouring grid landmarks. Larger than the default
/// 500 m truth cell, so two landmarks never share a cell.
pub const SPACING_KM: f64 = 0.6;
const JITTER_KM: f64 = 0.03;
const MAX_SPAN: usize = 4;
const MAX_CANDIDATES: usize = 6;
const REPEAT_PROB: f64 = 0.25;
const SUBMIT_GAP_HOURS: i64 = 6;
const DEADLINE_HOURS: f64 = 2.0;

pub const ORIGIN: GeoPoint = GeoPoint { lat: 31.2, lon: 121.4 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    pub landmarks: usize,
    pub workers: usize,
    pub requests: usize,
}

impl Sizes {
    pub fn new(landmarks: usize, workers: usize, requests: usize) -> Self {
        Self { landmarks, workers, requests }
    }

    pub fn check(&self) -> Result<(), SimError> {
        for (what, got, max) in [
            ("landmarks", self.landmarks, MAX_LANDMARKS),
            ("workers", self.workers, MAX_WORKERS),
            ("requests", self.requests, MAX_REQUESTS),
        ] {
            if got > max {
                return Err(SimError::TooLarge { what, got, max });
            }
        }
        for (what, got, min) in [("landmarks", self.landmarks, 4), ("workers", self.workers, 1), ("requests", self.requests, 1)] {
            if got < min {
                return Err(SimError::TooSmall { what, got, min });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimWorker {
    pub profile: WorkerProfile,
    /// True response rate per hour; simulated delays are drawn from it.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRequest {
    pub index: usize,
    pub request: RouteRequest,
    pub candidates: CandidateSet,
    /// Position of the preferred route in `candidates`.
    pub truth: usize,
    /// The earlier request this one repeats, if any.
    pub repeat_of: Option<usize>,
    pub submit_at: DateTime<Utc>,
}

impl SimRequest {
    pub fn truth_route(&self) -> &LandmarkRoute {
        &self.candidates.routes()[self.truth].route
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub seed: u64,
    pub sizes: Sizes,
    pub columns: usize,
    pub landmarks: Vec<Landmark>,
    pub checkins: Vec<VisitEvent>,
    pub workers: Vec<SimWorker>,
    /// In submission order.
    pub requests: Vec<SimRequest>,
    pub start: DateTime<Utc>,
}

impl World {
    pub fn landmark_id(&self, row: usize, col: usize) -> LandmarkId {
        grid_id(row * self.columns + col)
    }

    /// Rows in which every column holds a landmark.
    pub fn full_rows(&self) -> usize {
        self.sizes.landmarks / self.columns
    }

    pub fn worker(&self, id: &WorkerId) -> Option<&SimWorker> {
        self.workers.iter().find(|w| &w.profile.id == id)
    }
}

fn grid_id(i: usize) -> LandmarkId {
    LandmarkId::new(format!("L{i:03}"))
}

/// Monday 00:00 of the first simulated week.
pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 4, 1, 0, 0, 0).unwrap()
}

pub fn generate_world(seed: u64, sizes: Sizes) -> Result<World, SimError> {
    sizes.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = ((sizes.landmarks as f64).sqrt().floor() as usize).max(2);
    let start = epoch();

    let landmarks: Vec<Landmark> = (0..sizes.landmarks)
        .map(|i| {
            let (r, c) = (i / columns, i % columns);
            let north = r as f64 * SPACING_KM + rng.random_range(-JITTER_KM..=JITTER_KM);
            let east = c as f64 * SPACING_KM + rng.random_range(-JITTER_KM..=JITTER_KM);
            Landmark { id: grid_id(i), name: format!("Landmark r{r}c{c}"), location: ORIGIN.offset_km(north, east), significance: 0.5 }
        })
        .collect();

    let checkins = checkins(&mut rng, sizes.landmarks, start);
    let workers = (0..sizes.workers).map(|i| worker(&mut rng, i, &landmarks, columns)).collect();
    let mut world = World { seed, sizes, columns, landmarks, checkins, workers, requests: Vec::new(), start };
    world.requests = requests(&mut rng, &world)?;
    Ok(world)
}

/// A chain of travellers linking consecutive landmarks keeps the visit graph
/// connected; extra travellers favour a random subset of popular landmarks.
fn checkins(rng: &mut ChaCha8Rng, n: usize, start: DateTime<Utc>) -> Vec<VisitEvent> {
    let t0 = start.timestamp();
    let mut out = Vec::new();
    for i in 0..n - 1 {
        let who = format!("chain-{i:03}");
        out.push(VisitEvent::new(who.clone(), grid_id(i), t0 - rng.random_range(0..86_400 * 30)));
        out.push(VisitEvent::new(who, grid_id(i + 1), t0 - rng.random_range(0..86_400 * 30)));
    }
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(rng);
    let weights: Vec<f64> = rank.iter().map(|&r| 1.0 / (1.0 + r as f64)).collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    for t in 0..n / 2 + 10 {
        let who = format!("traveller-{t:03}");
        for _ in 0..rng.random_range(2..=6) {
            out.push(VisitEvent::new(who.clone(), grid_id(pick.sample(rng)), t0 - rng.random_range(0..86_400 * 30)));
        }
    }
    out
}

fn near(rng: &mut ChaCha8Rng, p: &GeoPoint, radius_km: f64) -> GeoPoint {
    p.offset_km(rng.random_range(-radius_km..=radius_km), rng.random_range(-radius_km..=radius_km))
}

fn worker(rng: &mut ChaCha8Rng, i: usize, landmarks: &[Landmark], columns: usize) -> SimWorker {
    let n = landmarks.len();
    let h = rng.random_range(0..n);
    let (hr, hc) = ((h / columns) as i64, (h % columns) as i64);
    let w = loop {
        let r = hr + rng.random_range(-2..=2);
        let c = (hc + rng.random_range(-2..=2)).clamp(0, columns as i64 - 1);
        let j = r * columns as i64 + c;
        if r >= 0 && (j as usize) < n {
            break j as usize;
        }
    };
    let home = near(rng, &landmarks[h].location, 0.3);
    let work = near(rng, &landmarks[w].location, 0.3);
    let frequented = if rng.random_bool(0.5) { near(rng, &home, 0.5) } else { near(rng, &work, 0.5) };

    let mut history = BTreeMap::new();
    for _ in 0..rng.random_range(0..=3) {
        let j = if rng.random_bool(0.5) { h } else { w };
        history.insert(landmarks[j].id.clone(), AnswerHistory { correct: rng.random_range(0..5), wrong: rng.random_range(0..2) });
    }

    let lambda = rng.random_range(0.5..3.0);
    let exp: Exp<f64> = Exp::new(lambda).expect("positive rate");
    let response_hours = (0..4).map(|_| exp.sample(rng).max(0.01)).collect();
    let profile = WorkerProfile {
        id: WorkerId::new(format!("w{i:03}")),
        home,
        work,
        frequented,
        history,
        response_hours,
        outstanding_tasks: 0,
    };
    SimWorker { profile, lambda }
}

/// All monotone paths between opposite corners of a `dr` × `dc` box, as
/// sequences of (row, col) steps away from the source.
fn lattice_paths(dr: usize, dc: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(dr + dc);
    fn rec(down: usize, right: usize, cur: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
        if down == 0 && right == 0 {
            out.push(cur.clone());
            return;
        }
        if down > 0 {
            cur.push(true);
            rec(down - 1, right, cur, out);
            cur.pop();
        }
        if right > 0 {
            cur.push(false);
            rec(down, right - 1, cur, out);
            cur.pop();
        }
    }
    rec(dr, dc, &mut cur, &mut out);
    out
}

fn requests(rng: &mut ChaCha8Rng, world: &World) -> Result<Vec<SimRequest>, SimError> {
    let rows = world.full_rows();
    let cols = world.columns;
    let mut hours: Vec<i64> = (0..168).collect();
    hours.shuffle(rng);
    let mut hours = hours.into_iter();
    let mut out: Vec<SimRequest> = Vec::with_capacity(world.sizes.requests);

    for index in 0..world.sizes.requests {
        let submit_at = world.start + Duration::hours(SUBMIT_GAP_HOURS * index as i64);
        let originals: Vec<usize> = out.iter().filter(|r| r.repeat_of.is_none()).map(|r| r.index).collect();
        if !originals.is_empty() && rng.random_bool(REPEAT_PROB) {
            let of = originals[rng.random_range(0..originals.len())];
            let mut r = out[of].clone();
            r.index = index;
            r.repeat_of = Some(of);
            r.submit_at = submit_at;
            r.request.requester = format!("requester-{index:02}");
            out.push(r);
            continue;
        }

        let dr = rng.random_range(1..=MAX_SPAN.min(rows - 1));
        let dc = rng.random_range(1..=MAX_SPAN.min(cols - 1));
        let r0 = rng.random_range(0..rows - dr);
        let c0 = rng.random_range(0..cols - dc);
        let (flip_r, flip_c) = (rng.random_bool(0.5), rng.random_bool(0.5));
        let src = (if flip_r { r0 + dr } else { r0 }, if flip_c { c0 + dc } else { c0 });
        let dst = (if flip_r { r0 } else { r0 + dr }, if flip_c { c0 } else { c0 + dc });

        let mut paths = lattice_paths(dr, dc);
        paths.shuffle(rng);
        let m = rng.random_range(2..=MAX_CANDIDATES).min(paths.len());
        let routes = paths[..m]
            .iter()
            .enumerate()
            .map(|(p, steps)| {
                let (mut r, mut c) = src;
                let mut ids = vec![world.landmark_id(r, c)];
                for &down in steps {
                    if down {
                        r = if flip_r { r - 1 } else { r + 1 };
                    } else {
                        c = if flip_c { c - 1 } else { c + 1 };
                    }
                    ids.push(world.landmark_id(r, c));
                }
                Ok((LandmarkRoute::new(ids)?, format!("provider-{p}")))
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let candidates = CandidateSet::new(routes)?;
        let truth = rng.random_range(0..candidates.len());

        let loc = |(r, c): (usize, usize)| world.landmarks[r * cols + c].location;
        let departure = world.start + Duration::days(7) + Duration::hours(hours.next().expect("168 buckets")) + Duration::minutes(rng.random_range(0..60));
        let request = RouteRequest {
            source: loc(src),
            destination: loc(dst),
            departure,
            deadline_hours: DEADLINE_HOURS,
            requester: format!("requester-{index:02}"),
        };
        out.push(SimRequest { index, request, candidates, truth, repeat_of: None, submit_at });
    }
    Ok(out)
}
