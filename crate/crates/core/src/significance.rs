//! Landmark significance from traveller visits, by mutual reinforcement on
//! the bipartite traveller–landmark graph: travellers act as authorities,
//! landmarks as hubs, and each visit as a weighted link.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::SignificanceError;
use crate::landmark::{LandmarkId, SignificanceLookup};

pub const DEFAULT_MAX_ITERS: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-9;

/// One check-in or trajectory visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitEvent {
    pub traveller: String,
    pub landmark: LandmarkId,
    pub timestamp: i64,
    /// Pre-scaled weight of the visit; 1 for a plain check-in.
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl VisitEvent {
    pub fn new(traveller: impl Into<String>, landmark: impl Into<LandmarkId>, timestamp: i64) -> Self {
        Self { traveller: traveller.into(), landmark: landmark.into(), timestamp, weight: 1.0 }
    }
}

/// Aggregated visit edges. Travellers and landmarks are kept in sorted order
/// so results do not depend on event order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisitGraph {
    travellers: Vec<String>,
    landmarks: Vec<LandmarkId>,
    /// `(traveller index, landmark index) -> total weight`.
    edges: BTreeMap<(usize, usize), f64>,
}

impl VisitGraph {
    pub fn travellers(&self) -> &[String] {
        &self.travellers
    }

    pub fn landmarks(&self) -> &[LandmarkId] {
        &self.landmarks
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, traveller: &str, landmark: &LandmarkId) -> Option<f64> {
        let t = self.travellers.binary_search_by(|x| x.as_str().cmp(traveller)).ok()?;
        let l = self.landmarks.binary_search(landmark).ok()?;
        self.edges.get(&(t, l)).copied()
    }
}

/// Groups events into weighted `(traveller, landmark)` edges.
/// `known` decides which landmark ids resolve.
pub fn build_visit_graph<'a>(
    events: impl IntoIterator<Item = &'a VisitEvent>,
    known: impl Fn(&LandmarkId) -> bool,
) -> Result<VisitGraph, SignificanceError> {
    let mut grouped: BTreeMap<(&str, &LandmarkId), f64> = BTreeMap::new();
    for e in events {
        if !known(&e.landmark) {
            return Err(SignificanceError::UnknownLandmark(e.landmark.clone()));
        }
        *grouped.entry((e.traveller.as_str(), &e.landmark)).or_insert(0.0) += e.weight;
    }
    let mut travellers: Vec<String> = grouped.keys().map(|(t, _)| t.to_string()).collect();
    travellers.dedup();
    let mut landmarks: Vec<LandmarkId> = grouped.keys().map(|(_, l)| (*l).clone()).collect::<HashSet<_>>().into_iter().collect();
    landmarks.sort();
    let edges = grouped
        .into_iter()
        .map(|((t, l), w)| {
            let ti = travellers.binary_search_by(|x| x.as_str().cmp(t)).expect("traveller present");
            let li = landmarks.binary_search(l).expect("landmark present");
            ((ti, li), w)
        })
        .collect();
    Ok(VisitGraph { travellers, landmarks, edges })
}

/// Landmark significances in `[0, 1]`, max 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignificanceScores(pub BTreeMap<LandmarkId, f64>);

impl SignificanceScores {
    pub fn get(&self, id: &LandmarkId) -> Option<f64> {
        self.0.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LandmarkId, f64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }
}

impl SignificanceLookup for SignificanceScores {
    fn significance(&self, id: &LandmarkId) -> Option<f64> {
        self.get(id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitsOutcome {
    pub scores: SignificanceScores,
    pub iterations: usize,
    /// Largest hub change in the final iteration.
    pub last_delta: f64,
}

fn normalize_l2(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// One authority/hub half-step pair. Returns the new hub vector (L2-normalized).
fn hits_step(g: &VisitGraph, hub: &[f64]) -> Vec<f64> {
    let mut auth = vec![0.0; g.travellers.len()];
    for (&(t, l), &w) in &g.edges {
        auth[t] += w * hub[l];
    }
    normalize_l2(&mut auth);
    let mut next = vec![0.0; g.landmarks.len()];
    for (&(t, l), &w) in &g.edges {
        next[l] += w * auth[t];
    }
    normalize_l2(&mut next);
    next
}

/// Weighted HITS, iterated until the largest hub change drops below `tol`
/// or `max_iters` is reached. Hub scores are rescaled so the maximum is 1.
pub fn infer_significance(g: &VisitGraph, max_iters: usize, tol: f64) -> Result<HitsOutcome, SignificanceError> {
    if max_iters == 0 || !(tol > 0.0) {
        return Err(SignificanceError::InvalidParameters { max_iters, tol });
    }
    if g.edges.is_empty() {
        return Err(SignificanceError::EmptyGraph);
    }
    let m = g.landmarks.len();
    let mut hub = vec![1.0 / (m as f64).sqrt(); m];
    let mut iterations = 0;
    let mut last_delta = f64::INFINITY;
    while iterations < max_iters {
        let next = hits_step(g, &hub);
        last_delta = next.iter().zip(&hub).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        hub = next;
        iterations += 1;
        if last_delta < tol {
            break;
        }
    }
    let max = hub.iter().copied().fold(0.0, f64::max);
    let scores = g
        .landmarks
        .iter()
        .zip(&hub)
        .map(|(id, h)| (id.clone(), if max > 0.0 { h / max } else { 0.0 }))
        .collect();
    Ok(HitsOutcome { scores: SignificanceScores(scores), iterations, last_delta })
}
