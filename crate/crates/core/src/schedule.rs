//! Variance-exploding diffusion schedule and the rho-spaced time grid.
//!
//! The forward process adds Gaussian noise with standard deviation equal to
//! forward time, so the marginal at forward time `s` is the data distribution
//! convolved with `N(0, s^2 I)`. In backward time `t = T - s` (with
//! `T = sigma_max`) the noise level is `sigma(t) = sigma_max - t`, the forward
//! drift is zero, and the forward diffusion coefficient is
//! `U(t) = sqrt(2 sigma(t))`. The backward diffusion coefficient is a free
//! parameter exposed as `V(t) = churn * U(t)`: `churn = 1` is the standard
//! reverse SDE, `churn = 0` the deterministic probability-flow limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance-exploding schedule parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    /// Smallest noise level reached by the grid (clipped, not zero).
    pub sigma_min: f64,
    /// Largest noise level; also the total backward-time horizon.
    pub sigma_max: f64,
    /// Spacing exponent of the grid; larger values cluster steps at low noise.
    pub rho: f64,
    /// Ratio `V(t) / U(t)` of backward to forward diffusion coefficients.
    pub churn: f64,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        Self {
            sigma_min: 0.005,
            sigma_max: 50.0,
            rho: 7.0,
            churn: 1.0,
        }
    }
}

/// Per-step coefficients the dynamics need at one backward time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoeffs {
    /// Noise level `sigma(t)`.
    pub sigma: f64,
    /// Forward diffusion coefficient `U(t) = sqrt(2 sigma)`.
    pub u_coeff: f64,
    /// Backward diffusion coefficient `V(t) = churn * U(t)`.
    pub v_coeff: f64,
}

impl DiffusionSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_max > self.sigma_min) {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < sigma_min < sigma_max, got ({}, {})",
                self.sigma_min, self.sigma_max
            )));
        }
        if !(self.rho > 0.0) {
            return Err(Error::InvalidSchedule(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.churn >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "churn must be >= 0, got {}",
                self.churn
            )));
        }
        Ok(())
    }

    /// Backward-time horizon: the grid runs on `[0, sigma_max - sigma_min]`.
    pub fn horizon(&self) -> f64 {
        self.sigma_max - self.sigma_min
    }

    /// Noise level at backward time `t`.
    pub fn noise_level(&self, t: f64) -> f64 {
        self.sigma_max - t
    }

    /// All coefficients at backward time `t`.
    pub fn coeffs(&self, t: f64) -> StepCoeffs {
        let sigma = self.noise_level(t);
        let u_coeff = (2.0 * sigma).sqrt();
        StepCoeffs {
            sigma,
            u_coeff,
            v_coeff: self.churn * u_coeff,
        }
    }
}

/// Strictly increasing backward-time grid `t_0 = 0 .. t_M = sigma_max - sigma_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    steps: Vec<f64>,
}

impl TimeGrid {
    /// `t_k = sigma_max - (sigma_max^(1/rho) + (k/M)(sigma_min^(1/rho) - sigma_max^(1/rho)))^rho`.
    ///
    /// The endpoints are pinned exactly so `t_0 = 0` and `t_M = sigma_max - sigma_min`
    /// regardless of rounding in the power expression.
    pub fn build(sched: &DiffusionSchedule, num_steps: usize) -> Result<Self> {
        sched.validate()?;
        if num_steps < 2 {
            return Err(Error::InvalidSchedule(format!(
                "grid needs at least 2 steps, got {num_steps}"
            )));
        }
        let inv_rho = 1.0 / sched.rho;
        let a = sched.sigma_max.powf(inv_rho);
        let b = sched.sigma_min.powf(inv_rho);
        let m = num_steps as f64;
        let mut steps = Vec::with_capacity(num_steps + 1);
        steps.push(0.0);
        for k in 1..num_steps {
            let frac = k as f64 / m;
            steps.push(sched.sigma_max - (a + frac * (b - a)).powf(sched.rho));
        }
        steps.push(sched.sigma_max - sched.sigma_min);
        Ok(Self { steps })
    }

    /// Number of integration steps `M` (the grid holds `M + 1` times).
    pub fn num_steps(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        self.steps[k]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.steps[k + 1] - self.steps[k]
    }
}
