//! Worker knowledge of landmarks: profile-based familiarity, completion of
//! the sparse worker × landmark matrix by probabilistic matrix factorization,
//! and spatial accumulation of the completed scores.

mod accumulate;
mod pmf;
mod profile;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::landmark::LandmarkId;

pub use accumulate::{accumulate, gaussian_pdf};
pub use pmf::{
    effective_rank, pmf_gradient, pmf_objective, predict_matrix, train_pmf, LatentFactors, MatrixRecord, PmfParams, TrainReport,
};
pub use profile::{build_matrix, profile_familiarity, FamiliarityConfig};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkerId(pub String);

impl WorkerId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for WorkerId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerHistory {
    pub correct: u32,
    pub wrong: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub id: WorkerId,
    pub home: crate::geo::GeoPoint,
    pub work: crate::geo::GeoPoint,
    /// Representative point of the worker's familiar area.
    pub frequented: crate::geo::GeoPoint,
    #[serde(default)]
    pub history: BTreeMap<LandmarkId, AnswerHistory>,
    /// Past response durations, in hours.
    #[serde(default)]
    pub response_hours: Vec<f64>,
    #[serde(default)]
    pub outstanding_tasks: u32,
}

/// Sparse worker × landmark scores. Rows follow `workers`, columns follow
/// `landmarks`; absent cells are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerLandmarkMatrix {
    workers: Vec<WorkerId>,
    landmarks: Vec<LandmarkId>,
    #[serde(with = "entry_list")]
    entries: BTreeMap<(usize, usize), f64>,
}

/// The familiarity matrix `M` (and its completion `M'`).
pub type FamiliarityMatrix = WorkerLandmarkMatrix;
/// The accumulated familiarity matrix `M*`.
pub type AccumulatedMatrix = WorkerLandmarkMatrix;

impl WorkerLandmarkMatrix {
    pub fn new(workers: Vec<WorkerId>, landmarks: Vec<LandmarkId>) -> Self {
        Self { workers, landmarks, entries: BTreeMap::new() }
    }

    pub fn workers(&self) -> &[WorkerId] {
        &self.workers
    }

    pub fn landmarks(&self) -> &[LandmarkId] {
        &self.landmarks
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.workers.len(), self.landmarks.len())
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, worker: usize, landmark: usize) -> f64 {
        self.entries.get(&(worker, landmark)).copied().unwrap_or(0.0)
    }

    pub fn is_observed(&self, worker: usize, landmark: usize) -> bool {
        self.entries.contains_key(&(worker, landmark))
    }

    /// Stores `value`; zero removes the cell.
    pub fn set(&mut self, worker: usize, landmark: usize, value: f64) {
        assert!(worker < self.workers.len() && landmark < self.landmarks.len(), "cell out of bounds");
        if value != 0.0 {
            self.entries.insert((worker, landmark), value);
        } else {
            self.entries.remove(&(worker, landmark));
        }
    }

    /// Non-zero cells in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn worker_index(&self, id: &WorkerId) -> Option<usize> {
        self.workers.iter().position(|w| w == id)
    }

    pub fn landmark_index(&self, id: &LandmarkId) -> Option<usize> {
        self.landmarks.iter().position(|l| l == id)
    }

    /// Value by ids; unknown ids read as zero.
    pub fn value(&self, worker: &WorkerId, landmark: &LandmarkId) -> f64 {
        match (self.worker_index(worker), self.landmark_index(landmark)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = Self::new(self.workers.clone(), self.landmarks.clone());
        for (i, j, v) in self.iter() {
            out.set(i, j, v * c);
        }
        out
    }
}

mod entry_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<(usize, usize), f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(|(&(i, j), &v)| (i, j, v)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), f64>, D::Error> {
        let v: Vec<(usize, usize, f64)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|(i, j, x)| ((i, j), x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_matrix_basics() {
        let mut m = WorkerLandmarkMatrix::new(vec!["w1".into(), "w2".into()], vec!["a".into(), "b".into()]);
        m.set(1, 0, 2.5);
        m.set(0, 1, 0.0);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.value(&"w2".into(), &"a".into()), 2.5);
        assert_eq!(m.value(&"nobody".into(), &"a".into()), 0.0);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<WorkerLandmarkMatrix>(&json).unwrap(), m);
    }
}
