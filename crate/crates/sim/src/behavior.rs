use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// How likely a worker is to answer according to the preferred route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Accuracy {
    Perfect,
    Constant { p: f64 },
    /// `0.5 + 0.5 (1 - exp(-F / scale))`: chance level for strangers,
    /// approaching certainty with accumulated familiarity `F`.
    Familiarity { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorModel {
    pub accuracy: Accuracy,
}

impl BehaviorModel {
    pub fn perfect() -> Self {
        Self { accuracy: Accuracy::Perfect }
    }

    pub fn constant(p: f64) -> Result<Self, SimError> {
        let b = Self { accuracy: Accuracy::Constant { p } };
        b.validate()?;
        Ok(b)
    }

    pub fn familiarity(scale: f64) -> Result<Self, SimError> {
        let b = Self { accuracy: Accuracy::Familiarity { scale } };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self.accuracy {
            Accuracy::Perfect => Ok(()),
            Accuracy::Constant { p } if (0.5..=1.0).contains(&p) => Ok(()),
            Accuracy::Constant { p } => Err(SimError::InvalidBehavior(format!("accuracy {p} outside [0.5, 1]"))),
            Accuracy::Familiarity { scale } if scale > 0.0 && scale.is_finite() => Ok(()),
            Accuracy::Familiarity { scale } => Err(SimError::InvalidBehavior(format!("familiarity scale must be positive, got {scale}"))),
        }
    }

    /// Probability of a truthful answer given accumulated familiarity `f`.
    pub fn accuracy(&self, f: f64) -> f64 {
        match self.accuracy {
            Accuracy::Perfect => 1.0,
            Accuracy::Constant { p } => p,
            Accuracy::Familiarity { scale } => 0.5 + 0.5 * (1.0 - (-f.max(0.0) / scale).exp()),
        }
    }

    /// Answer to "does your route pass this landmark?" when the truthful
    /// answer is `truth`.
    pub fn answer(&self, truth: bool, f: f64, rng: &mut impl Rng) -> bool {
        let p = self.accuracy(f);
        if p >= 1.0 || rng.random_bool(p) {
            truth
        } else {
            !truth
        }
    }

    /// Hours until a worker with rate `lambda` starts on a task.
    pub fn delay_hours(&self, lambda: f64, rng: &mut impl Rng) -> f64 {
        Exp::new(lambda).expect("positive rate").sample(rng)
    }
}
