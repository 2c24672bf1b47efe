//! Verified routes kept for reuse, keyed by origin/destination cell and
//! departure hour of the week.

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
use routecrowd_core::geo::{GeoPoint, KM_PER_DEGREE};
use routecrowd_core::LandmarkRoute;
use serde::{Deserialize, Serialize};

use crate::config::TruthConfig;

/// A square cell of a roughly equal-area grid: rows are bands of latitude,
/// columns are scaled by the cosine of the band's center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub row: i64,
    pub col: i64,
}

impl CellId {
    pub fn of(p: &GeoPoint, cell_m: f64) -> Self {
        let cell_km = cell_m / 1000.0;
        let row = (p.lat * KM_PER_DEGREE / cell_km).floor();
        let center_lat = (row + 0.5) * cell_km / KM_PER_DEGREE;
        let scale = center_lat.to_radians().cos().max(1e-9);
        let col = (p.lon * KM_PER_DEGREE * scale / cell_km).floor();
        Self { row: row as i64, col: col as i64 }
    }
}

/// Hours since Monday 00:00, in `0..168`.
pub fn hour_of_week(t: &DateTime<Utc>) -> u8 {
    (t.weekday().num_days_from_monday() * 24 + t.hour()) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TruthKey {
    pub source: CellId,
    pub destination: CellId,
    pub time_bucket: u8,
}

impl TruthKey {
    pub fn new(source: &GeoPoint, destination: &GeoPoint, departure: &DateTime<Utc>, cfg: &TruthConfig) -> Self {
        Self {
            source: CellId::of(source, cfg.cell_m),
            destination: CellId::of(destination, cfg.cell_m),
            time_bucket: hour_of_week(departure),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub id: String,
    pub key: TruthKey,
    pub best_route: LandmarkRoute,
    pub confidence: f64,
    pub created_at: DateTime<Utc>,
    pub ttl_secs: i64,
    /// Task whose resolution produced this record.
    pub task: String,
}

impl TruthRecord {
    pub fn is_fresh(&self, now: &DateTime<Utc>) -> bool {
        *now - self.created_at < Duration::seconds(self.ttl_secs)
    }
}

pub fn ttl_secs(cfg: &TruthConfig) -> i64 {
    (cfg.ttl_days * 86_400.0).round() as i64
}

/// The newest fresh record for `key`.
pub fn reuse_truth<'a>(key: &TruthKey, truths: impl IntoIterator<Item = &'a TruthRecord>, now: &DateTime<Utc>) -> Option<&'a TruthRecord> {
    truths
        .into_iter()
        .filter(|t| t.key == *key && t.is_fresh(now))
        .max_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)))
}
