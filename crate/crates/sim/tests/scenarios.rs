use std::collections::{BTreeMap, BTreeSet};

use routecrowd_core::route::is_discriminative;
use routecrowd_service::events::EventKind;
use routecrowd_service::{Method, ServiceConfig};
use routecrowd_sim::world::{MAX_LANDMARKS, MAX_REQUESTS, MAX_WORKERS};
use routecrowd_sim::*;

fn check_world(w: &World) {
    assert_eq!(w.landmarks.len(), w.sizes.landmarks);
    assert_eq!(w.workers.len(), w.sizes.workers);
    assert_eq!(w.requests.len(), w.sizes.requests);
    let known: BTreeSet<_> = w.landmarks.iter().map(|l| l.id.clone()).collect();
    for r in &w.requests {
        let n = r.candidates.len();
        assert!((2..=6).contains(&n), "{n} candidates");
        let memberships: BTreeSet<_> = r.candidates.memberships().cloned().collect();
        assert_eq!(memberships.len(), n, "memberships must be distinct");
        assert!(r.truth < n);
        assert!(r.candidates.routes().iter().all(|c| c.route.ids().iter().all(|id| known.contains(id))));
        // The whole landmark set separates the routes.
        assert!(is_discriminative(&known, &r.candidates));
        if let Some(of) = r.repeat_of {
            let o = &w.requests[of];
            assert!(of < r.index && o.repeat_of.is_none());
            assert_eq!((&o.request.source, &o.request.destination, o.request.departure), (&r.request.source, &r.request.destination, r.request.departure));
            assert_eq!(o.candidates, r.candidates);
            assert_eq!(o.truth, r.truth);
        }
    }
    assert!(w.requests.windows(2).all(|p| p[0].submit_at < p[1].submit_at));
    for s in &w.workers {
        assert!(s.lambda > 0.0);
        assert!(!s.profile.response_hours.is_empty());
    }
}

#[test]
fn same_seed_same_world() {
    let a = generate_world(11, Sizes::new(40, 20, 10)).unwrap();
    let b = generate_world(11, Sizes::new(40, 20, 10)).unwrap();
    assert_eq!(a, b);
    let c = generate_world(12, Sizes::new(40, 20, 10)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn small_world_invariants() {
    for seed in 0..30 {
        check_world(&generate_world(seed, Sizes::new(10, 5, 3)).unwrap());
    }
    check_world(&generate_world(3, Sizes::new(MAX_LANDMARKS, MAX_WORKERS, MAX_REQUESTS)).unwrap());
    check_world(&generate_world(4, Sizes::new(4, 1, 1)).unwrap());
}

#[test]
fn oversize_is_rejected() {
    let err = generate_world(1, Sizes::new(MAX_LANDMARKS + 1, 5, 3)).unwrap_err();
    assert!(matches!(err, SimError::TooLarge { what: "landmarks", got: 501, max: 500 }));
    assert!(generate_world(1, Sizes::new(10, MAX_WORKERS + 1, 3)).is_err());
    assert!(generate_world(1, Sizes::new(10, 5, MAX_REQUESTS + 1)).is_err());
}

#[test]
fn runs_are_deterministic() {
    let w = generate_world(5, Sizes::new(25, 10, 6)).unwrap();
    let b = BehaviorModel::familiarity(0.3).unwrap();
    let a = run_scenario(&w, &b, &ServiceConfig::default()).unwrap();
    let c = run_scenario(&w, &b, &ServiceConfig::default()).unwrap();
    assert_eq!(a.events, c.events);
    assert_eq!(a.report, c.report);
}

#[test]
fn report_matches_engine_state() {
    for seed in 0..4 {
        let w = generate_world(seed, Sizes::new(25, 12, 8)).unwrap();
        let run = run_scenario(&w, &BehaviorModel::constant(0.8).unwrap(), &ServiceConfig::default()).unwrap();
        assert_eq!(run.report, ScenarioReport::from_state(&w, &run.requests, &run.tasks));
        assert_eq!(run.report.rows.len(), w.requests.len());
    }
}

#[test]
fn questions_stay_within_tree_bounds() {
    for seed in 0..4 {
        let w = generate_world(seed, Sizes::new(30, 12, 8)).unwrap();
        let run = run_scenario(&w, &BehaviorModel::constant(0.7).unwrap(), &ServiceConfig::default()).unwrap();
        for t in &run.tasks {
            let depth = t.tree.depth();
            assert!(depth <= t.selected.len());
            for a in &t.assignments {
                assert!(a.trace.len() <= depth, "{} asked {} questions, depth {depth}", a.worker, a.trace.len());
                if let Some(leaf) = a.leaf {
                    // Replaying the trace from the root reaches the recorded leaf.
                    assert_eq!(t.tree.path_to(leaf).unwrap(), a.trace);
                }
            }
        }
    }
}

#[test]
fn perfect_workers_find_the_preferred_route() {
    for seed in 0..5 {
        let w = generate_world(seed, Sizes::new(36, 15, 10)).unwrap();
        let run = run_scenario(&w, &BehaviorModel::perfect(), &ServiceConfig::default()).unwrap();
        for t in &run.tasks {
            let req = &w.requests[run.report.rows.iter().find(|r| r.task.as_ref() == Some(&t.id)).unwrap().index];
            for a in t.assignments.iter().filter(|a| a.leaf.is_some()) {
                assert_eq!(a.leaf, Some(req.truth));
            }
        }
        let s = run.report.summary();
        assert!(s.crowd > 0);
        assert_eq!(s.crowd_correct, s.crowd);
    }
}

#[test]
fn repeated_request_reuses_the_truth() {
    let mut seen = 0;
    for seed in 0..10 {
        let w = generate_world(seed, Sizes::new(36, 15, 10)).unwrap();
        let run = run_scenario(&w, &BehaviorModel::perfect(), &ServiceConfig::default()).unwrap();
        for row in &run.report.rows {
            let Some(of) = row.repeat_of else { continue };
            let original = &run.report.rows[of];
            if original.method == Some(Method::Crowd) {
                assert_eq!(row.method, Some(Method::TruthReuse), "request {}", row.index);
                assert_eq!(row.total_questions(), 0);
                assert!(row.task.is_none());
                assert_eq!(row.correct, Some(true));
                seen += 1;
            }
        }
    }
    assert!(seen > 0);
}

/// With coin-flip answers every question sends the worker down either branch
/// with probability 1/2, so a single worker lands on the preferred route with
/// probability 2^-depth of that route's leaf.
#[test]
fn coin_flip_workers_are_at_chance_level() {
    let mut cfg = ServiceConfig::default();
    cfg.assignment.k = 1;
    let b = BehaviorModel::constant(0.5).unwrap();
    let (mut hits, mut mean, mut var, mut tasks) = (0.0, 0.0, 0.0, 0);
    for seed in 0..200 {
        let w = generate_world(1000 + seed, Sizes::new(16, 6, 3)).unwrap();
        let run = run_scenario(&w, &b, &cfg).unwrap();
        for row in run.report.rows.iter().filter(|r| r.method == Some(Method::Crowd)) {
            let t = run.tasks.iter().find(|t| Some(&t.id) == row.task.as_ref()).unwrap();
            let depth = t.tree.path_to(w.requests[row.index].truth).unwrap().len();
            let p = 0.5f64.powi(depth as i32);
            mean += p;
            var += p * (1.0 - p);
            hits += f64::from(u8::from(row.correct == Some(true)));
            tasks += 1;
        }
    }
    assert!(tasks > 100, "only {tasks} crowd tasks");
    let sd = var.sqrt();
    assert!((hits - mean).abs() <= 3.0 * sd, "{hits} hits, expected {mean:.2} ± {sd:.2} over {tasks} tasks");
}

/// Replays trace completions per task. Returns (rule held, early stop fired)
/// counts and fails on any mismatch.
fn replay_early_stops(events: &[routecrowd_service::events::Event], cfg: &ServiceConfig) -> (usize, usize) {
    let es = cfg.early_stop;
    let mut k: BTreeMap<&str, usize> = BTreeMap::new();
    let mut votes: BTreeMap<&str, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut pending: BTreeSet<&str> = BTreeSet::new();
    let (mut held, mut fired, mut plain) = (0, 0, 0);
    for e in events {
        match &e.kind {
            EventKind::WorkersAssigned { task, workers, .. } => *k.entry(task).or_default() += workers.len(),
            EventKind::TraceCompleted { task, route, .. } => {
                let v = votes.entry(task).or_default();
                *v.entry(*route).or_default() += 1;
                let completed: usize = v.values().sum();
                let mut counts: Vec<usize> = v.values().copied().collect();
                counts.sort_unstable_by(|a, b| b.cmp(a));
                let threshold = es.m_min.max((es.eta_stop * k[task.as_str()] as f64).ceil() as usize);
                let leader = counts.len() == 1 || counts[0] > counts[1];
                if completed < k[task.as_str()] && leader && counts[0] >= threshold {
                    pending.insert(task);
                    held += 1;
                }
            }
            EventKind::EarlyStop { task, .. } => {
                assert!(pending.remove(task.as_str()), "early stop on {task} without the rule");
                fired += 1;
            }
            EventKind::TaskResolved { task, early_stop, .. } => {
                assert!(!pending.contains(task.as_str()), "rule held on {task} but it resolved without stopping");
                plain += usize::from(!early_stop);
            }
            _ => {}
        }
    }
    assert!(pending.is_empty());
    assert_eq!(held, fired);
    (fired, plain)
}

#[test]
fn early_stop_matches_the_rule_in_the_log() {
    let cfg = ServiceConfig::default();
    let (mut fired, mut plain) = (0, 0);
    for seed in 0..12 {
        let w = generate_world(seed, Sizes::new(36, 20, 8)).unwrap();
        let run = run_scenario(&w, &BehaviorModel::constant(0.75).unwrap(), &cfg).unwrap();
        let (f, p) = replay_early_stops(&run.events, &cfg);
        assert_eq!(f, run.report.summary().early_stops);
        fired += f;
        plain += p;
    }
    // Noisy answers produce both kinds of resolution.
    assert!(fired > 0 && plain > 0, "{fired} early, {plain} plain");
}

#[test]
fn report_files() {
    let w = generate_world(2, Sizes::new(25, 10, 5)).unwrap();
    let run = run_scenario(&w, &BehaviorModel::perfect(), &ServiceConfig::default()).unwrap();
    let mut rows = Vec::new();
    run.report.write_rows(&mut rows).unwrap();
    let text = String::from_utf8(rows).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("index,request,repeat_of,outcome,method"));
    let mut summary = Vec::new();
    run.report.write_summary(&mut summary).unwrap();
    let text = String::from_utf8(summary).unwrap();
    assert!(text.contains("\nrequests,5\n"));
    assert!(text.contains("\nseed,2\n"));
}
