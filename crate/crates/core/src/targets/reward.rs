//! Quadratic rewards and the interpolation schedule `beta_t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `r(x) = -||x - center||^2 / (2 scale)`, the log-likelihood of an isotropic
/// Gaussian evidence term with covariance `scale * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticReward {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl QuadraticReward {
    pub fn new(center: Vec<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidSpec(format!("reward scale must be > 0, got {scale}")));
        }
        if center.is_empty() {
            return Err(Error::InvalidSpec("reward center must be non-empty".into()));
        }
        Ok(Self { center, scale })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let sq: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        -0.5 * sq / self.scale
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&self.center)) {
            *o = (ci - xi) / self.scale;
        }
    }

    pub fn laplacian(&self) -> f64 {
        -(self.dim() as f64) / self.scale
    }
}

/// Interpolation `r_t = beta(t) * r` from `beta(0) = 0` to `beta(T) = 1`.
///
/// Only the linear ramp is implemented; the enum leaves room for
/// noise-matched ramps later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardScheduleKind {
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSchedule {
    pub kind: RewardScheduleKind,
    /// Total backward-time horizon `T`.
    pub horizon: f64,
}

impl RewardSchedule {
    pub fn linear(horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidSpec(format!("horizon must be > 0, got {horizon}")));
        }
        Ok(Self {
            kind: RewardScheduleKind::Linear,
            horizon,
        })
    }

    pub fn beta(&self, t: f64) -> f64 {
        match self.kind {
            RewardScheduleKind::Linear => (t / self.horizon).clamp(0.0, 1.0),
        }
    }

    pub fn beta_dot(&self, _t: f64) -> f64 {
        match self.kind {
            RewardScheduleKind::Linear => 1.0 / self.horizon,
        }
    }
}
