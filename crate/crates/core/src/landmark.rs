//! Landmarks and a grid-bucketed spatial index over them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geo::{GeoPoint, KM_PER_DEGREE};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LandmarkId(pub String);

impl LandmarkId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LandmarkId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: LandmarkId,
    pub name: String,
    pub location: GeoPoint,
    /// Significance in `[0, 1]` once normalized.
    pub significance: f64,
}

/// Anything that can report a landmark's significance.
pub trait SignificanceLookup {
    fn significance(&self, id: &LandmarkId) -> Option<f64>;
}

impl SignificanceLookup for BTreeMap<LandmarkId, f64> {
    fn significance(&self, id: &LandmarkId) -> Option<f64> {
        self.get(id).copied()
    }
}

impl SignificanceLookup for HashMap<LandmarkId, f64> {
    fn significance(&self, id: &LandmarkId) -> Option<f64> {
        self.get(id).copied()
    }
}

/// Min-max normalizes raw significance values into `[0, 1]`.
///
/// When every value is equal there is no spread to normalize, and all
/// landmarks get significance 1.
pub fn normalize_significance(landmarks: &mut [Landmark]) {
    let (lo, hi) = landmarks.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
        (lo.min(l.significance), hi.max(l.significance))
    });
    let span = hi - lo;
    for l in landmarks.iter_mut() {
        l.significance = if span > 0.0 { (l.significance - lo) / span } else { 1.0 };
    }
}

const CELL_DEGREES: f64 = 0.02;

type Cell = (i64, i64);

fn cell_of(p: &GeoPoint) -> Cell {
    ((p.lat / CELL_DEGREES).floor() as i64, (p.lon / CELL_DEGREES).floor() as i64)
}

/// Landmark set with id lookup and exact great-circle range queries.
#[derive(Debug, Clone, Default)]
pub struct LandmarkIndex {
    landmarks: Vec<Landmark>,
    by_id: HashMap<LandmarkId, usize>,
    grid: HashMap<Cell, Vec<usize>>,
}

impl LandmarkIndex {
    pub fn new(landmarks: Vec<Landmark>) -> Result<Self, ModelError> {
        let mut by_id = HashMap::with_capacity(landmarks.len());
        let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, l) in landmarks.iter().enumerate() {
            GeoPoint::new(l.location.lat, l.location.lon)?;
            if by_id.insert(l.id.clone(), i).is_some() {
                return Err(ModelError::DuplicateLandmark(l.id.clone()));
            }
            grid.entry(cell_of(&l.location)).or_default().push(i);
        }
        Ok(Self { landmarks, by_id, grid })
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn get(&self, id: &LandmarkId) -> Option<&Landmark> {
        self.by_id.get(id).map(|&i| &self.landmarks[i])
    }

    pub fn position(&self, id: &LandmarkId) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Landmark> {
        self.landmarks.iter()
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    /// Replaces significances from `scores`; landmarks missing from it get 0.
    pub fn with_significance(mut self, scores: &impl SignificanceLookup) -> Self {
        for l in &mut self.landmarks {
            l.significance = scores.significance(&l.id).unwrap_or(0.0);
        }
        self
    }

    /// All landmarks whose great-circle distance to `q` is at most `radius_km`,
    /// paired with that distance, in index order.
    pub fn within(&self, q: &GeoPoint, radius_km: f64) -> Vec<(&Landmark, f64)> {
        if radius_km < 0.0 || self.landmarks.is_empty() {
            return Vec::new();
        }
        let dlat = radius_km / KM_PER_DEGREE;
        let lat_lo = ((q.lat - dlat) / CELL_DEGREES).floor() as i64;
        let lat_hi = ((q.lat + dlat) / CELL_DEGREES).floor() as i64;
        let max_abs_lat = (q.lat.abs() + dlat).min(90.0);
        let cos = max_abs_lat.to_radians().cos();

        let mut hits: Vec<usize> = Vec::new();
        let dlon = if cos > 1e-6 { radius_km / (KM_PER_DEGREE * cos) } else { 360.0 };
        if dlon >= 180.0 || (q.lon - dlon) < -180.0 || (q.lon + dlon) > 180.0 {
            // Polar caps and antimeridian crossings fall back to a full scan.
            hits.extend(0..self.landmarks.len());
        } else {
            let lon_lo = ((q.lon - dlon) / CELL_DEGREES).floor() as i64;
            let lon_hi = ((q.lon + dlon) / CELL_DEGREES).floor() as i64;
            let cells = ((lat_hi - lat_lo + 1) * (lon_hi - lon_lo + 1)) as usize;
            if cells > self.grid.len() {
                for (&(a, b), members) in &self.grid {
                    if (lat_lo..=lat_hi).contains(&a) && (lon_lo..=lon_hi).contains(&b) {
                        hits.extend(members);
                    }
                }
            } else {
                for a in lat_lo..=lat_hi {
                    for b in lon_lo..=lon_hi {
                        if let Some(members) = self.grid.get(&(a, b)) {
                            hits.extend(members);
                        }
                    }
                }
            }
        }
        hits.sort_unstable();
        hits.into_iter()
            .filter_map(|i| {
                let l = &self.landmarks[i];
                let d = q.distance_km(&l.location);
                (d <= radius_km).then_some((l, d))
            })
            .collect()
    }

    /// Closest landmark within `radius_km`; ties go to the smaller id.
    pub fn nearest_within(&self, q: &GeoPoint, radius_km: f64) -> Option<(&Landmark, f64)> {
        self.within(q, radius_km).into_iter().min_by(|a, b| {
            a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id))
        })
    }
}

impl SignificanceLookup for LandmarkIndex {
    fn significance(&self, id: &LandmarkId) -> Option<f64> {
        self.get(id).map(|l| l.significance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lm(id: &str, lat: f64, lon: f64, s: f64) -> Landmark {
        Landmark { id: id.into(), name: id.to_uppercase(), location: GeoPoint { lat, lon }, significance: s }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = LandmarkIndex::new(vec![lm("a", 0.0, 0.0, 0.1), lm("a", 1.0, 1.0, 0.2)]).unwrap_err();
        assert_eq!(err, ModelError::DuplicateLandmark("a".into()));
    }

    #[test]
    fn normalization_maps_to_unit_interval() {
        let mut ls = vec![lm("a", 0.0, 0.0, 2.0), lm("b", 0.0, 0.0, 4.0), lm("c", 0.0, 0.0, 3.0)];
        normalize_significance(&mut ls);
        let s: Vec<f64> = ls.iter().map(|l| l.significance).collect();
        assert_eq!(s, vec![0.0, 1.0, 0.5]);

        let mut flat = vec![lm("a", 0.0, 0.0, 7.0), lm("b", 0.0, 0.0, 7.0)];
        normalize_significance(&mut flat);
        assert!(flat.iter().all(|l| l.significance == 1.0));
    }

    #[test]
    fn range_query_near_antimeridian_falls_back() {
        let idx = LandmarkIndex::new(vec![lm("w", 0.0, 179.999, 0.0), lm("e", 0.0, -179.999, 0.0)]).unwrap();
        let hits = idx.within(&GeoPoint { lat: 0.0, lon: 180.0 }, 1.0);
        assert_eq!(hits.len(), 2);
    }

    proptest! {
        #[test]
        fn range_query_matches_linear_scan(
            pts in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 1..60),
            q in (-0.3f64..0.3, -0.3f64..0.3),
            r in 0.0f64..25.0,
        ) {
            let base = (48.85, 2.35);
            let ls: Vec<Landmark> = pts.iter().enumerate()
                .map(|(i, (a, b))| lm(&format!("l{i}"), base.0 + a, base.1 + b, 0.0))
                .collect();
            let q = GeoPoint { lat: base.0 + q.0, lon: base.1 + q.1 };
            let idx = LandmarkIndex::new(ls.clone()).unwrap();
            let got: Vec<&str> = idx.within(&q, r).iter().map(|(l, _)| l.id.as_str()).collect();
            let want: Vec<&str> = ls.iter().filter(|l| q.distance_km(&l.location) <= r).map(|l| l.id.as_str()).collect();
            prop_assert_eq!(got, want);
        }
    }
}
