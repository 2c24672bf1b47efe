use serde::{Deserialize, Serialize};

use super::{FamiliarityMatrix, WorkerProfile};
use crate::landmark::{Landmark, LandmarkIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamiliarityConfig {
    /// Weight of the proximity term against the history term, in `[0, 1]`.
    pub alpha: f64,
    /// Credit for a wrong answer relative to a correct one, in `[0, 1)`.
    pub beta: f64,
    /// Knowledge radius in kilometers; anchors farther than this count as infinitely far.
    pub eta_dis_km: f64,
    /// Use raw kilometers in the exponent instead of distances scaled by `eta_dis_km`.
    #[serde(default)]
    pub raw_distance_units: bool,
}

impl Default for FamiliarityConfig {
    fn default() -> Self {
        Self { alpha: 0.5, beta: 0.3, eta_dis_km: 3.0, raw_distance_units: false }
    }
}

/// Familiarity of one worker with one landmark: a proximity term over the
/// worker's home, work and frequented place plus a history term.
pub fn profile_familiarity(w: &WorkerProfile, l: &Landmark, cfg: &FamiliarityConfig) -> f64 {
    let mut exponent = 0.0;
    for anchor in [&w.home, &w.work, &w.frequented] {
        let d = l.location.distance_km(anchor);
        if d > cfg.eta_dis_km {
            exponent = f64::INFINITY;
            break;
        }
        exponent += if cfg.raw_distance_units { d } else { d / cfg.eta_dis_km };
    }
    let proximity = (-exponent).exp();
    let h = w.history.get(&l.id).copied().unwrap_or_default();
    let history = h.correct as f64 + cfg.beta * h.wrong as f64;
    cfg.alpha * proximity + (1.0 - cfg.alpha) * history
}

/// Builds `M`, storing only non-zero familiarities. Rows follow `workers`,
/// columns follow the index order.
pub fn build_matrix(workers: &[WorkerProfile], index: &LandmarkIndex, cfg: &FamiliarityConfig) -> FamiliarityMatrix {
    let mut m = FamiliarityMatrix::new(
        workers.iter().map(|w| w.id.clone()).collect(),
        index.iter().map(|l| l.id.clone()).collect(),
    );
    for (i, w) in workers.iter().enumerate() {
        // Only landmarks near the home anchor or with history can be non-zero.
        let mut cols: Vec<usize> = index
            .within(&w.home, cfg.eta_dis_km)
            .into_iter()
            .filter_map(|(l, _)| index.position(&l.id))
            .chain(w.history.keys().filter_map(|id| index.position(id)))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        for j in cols {
            let f = profile_familiarity(w, &index.landmarks()[j], cfg);
            if f > 0.0 {
                m.set(i, j, f);
            }
        }
    }
    m
}
