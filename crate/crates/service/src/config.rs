use std::collections::BTreeMap;
use std::path::Path;

use routecrowd_core::assign::{EligibilityConfig, DEFAULT_LAMBDA};
use routecrowd_core::familiarity::{FamiliarityConfig, PmfParams};
use routecrowd_core::route::DEFAULT_SNAP_RADIUS_KM;
use routecrowd_core::select::Algorithm;
use routecrowd_core::significance::{DEFAULT_MAX_ITERS, DEFAULT_TOL};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Every tunable threshold of the service. Loaded from TOML; any section or
/// key may be omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub evaluation: EvaluationConfig,
    pub truth: TruthConfig,
    pub selection: SelectionConfig,
    pub significance: SignificanceConfig,
    pub familiarity: FamiliarityConfig,
    pub pmf: PmfParams,
    pub assignment: AssignmentConfig,
    pub early_stop: EarlyStopConfig,
    pub rewards: RewardConfig,
    pub server: ServerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Confidence a route needs before it is accepted without the crowd, and
    /// before a crowd resolution is stored as a truth.
    pub eta: f64,
    /// Minimum landmark Jaccard similarity for two candidates to agree.
    pub tau_agree: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { eta: 0.8, tau_agree: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthConfig {
    /// Side of the square origin/destination cells, in meters.
    pub cell_m: f64,
    pub ttl_days: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self { cell_m: 500.0, ttl_days: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub algorithm: Algorithm,
    pub relax_min_size: bool,
    pub snap_radius_km: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { algorithm: Algorithm::Greedy, relax_min_size: false, snap_radius_km: DEFAULT_SNAP_RADIUS_KM }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignificanceConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self { max_iters: DEFAULT_MAX_ITERS, tol: DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignmentConfig {
    pub k: usize,
    pub eta_time: f64,
    pub max_outstanding: u32,
    /// Response rate (per hour) assumed for workers without history.
    pub default_lambda: f64,
    /// Delay before retrying worker selection for a task nobody could take.
    pub retry_backoff_secs: i64,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        Self { k: 5, eta_time: 0.5, max_outstanding: 3, default_lambda: DEFAULT_LAMBDA, retry_backoff_secs: 600 }
    }
}

impl AssignmentConfig {
    pub fn eligibility(&self) -> EligibilityConfig {
        EligibilityConfig {
            eta_time: self.eta_time,
            max_outstanding: self.max_outstanding,
            k: self.k,
            default_lambda: self.default_lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyStopConfig {
    pub eta_stop: f64,
    pub m_min: usize,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        Self { eta_stop: 0.6, m_min: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub base: u64,
    pub per_question: u64,
    pub agreement_bonus: u64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { base: 1, per_question: 1, agreement_bonus: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Database file; in-memory storage when absent.
    pub store_path: Option<String>,
    /// Required in `x-admin-token` for admin endpoints when set.
    pub admin_token: Option<String>,
    /// Worker id to opaque token. When non-empty, worker endpoints require
    /// the matching `x-worker-token` header.
    pub worker_tokens: BTreeMap<String, String>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { bind: "127.0.0.1:8080".into(), store_path: None, admin_token: None, worker_tokens: BTreeMap::new() }
    }
}

fn unit_open(name: &str, v: f64) -> Result<(), ServiceError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ServiceError::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), ServiceError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ServiceError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        unit_open("evaluation.eta", self.evaluation.eta)?;
        if !(self.evaluation.tau_agree > 0.0 && self.evaluation.tau_agree <= 1.0) {
            return Err(ServiceError::Config(format!("evaluation.tau_agree must lie in (0, 1], got {}", self.evaluation.tau_agree)));
        }
        positive("truth.cell_m", self.truth.cell_m)?;
        positive("truth.ttl_days", self.truth.ttl_days)?;
        positive("selection.snap_radius_km", self.selection.snap_radius_km)?;
        if !(0.0..=1.0).contains(&self.familiarity.alpha) || !(0.0..1.0).contains(&self.familiarity.beta) {
            return Err(ServiceError::Config("familiarity.alpha must lie in [0, 1] and beta in [0, 1)".into()));
        }
        positive("familiarity.eta_dis_km", self.familiarity.eta_dis_km)?;
        self.assignment.eligibility().validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        if self.assignment.retry_backoff_secs < 0 {
            return Err(ServiceError::Config("assignment.retry_backoff_secs must not be negative".into()));
        }
        unit_open("early_stop.eta_stop", self.early_stop.eta_stop)?;
        if self.early_stop.m_min < 1 {
            return Err(ServiceError::Config("early_stop.m_min must be at least 1".into()));
        }
        if self.pmf.d < 1 {
            return Err(ServiceError::Config("pmf.d must be at least 1".into()));
        }
        positive("pmf.lr", self.pmf.lr)?;
        Ok(())
    }
}
