//! Engine configuration and the method family.

use serde::{Deserialize, Serialize};

use crate::control::ControlMode;
use crate::error::{Error, Result};

/// Sampling method.
///
/// The family forms a lattice: plain guidance is the weighted path with the
/// potential zeroed and no resampling; the guidance-SMC baseline is a
/// controlled method with zero control; the non-SMC controlled variants are
/// their SMC counterparts with resampling disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pure guidance: unweighted, biased baseline.
    Pg,
    /// Guidance-SMC: weighted particles, no control drift.
    GSmc,
    /// Variance-controlling guidance without resampling.
    Vcg,
    /// Variance-controlling guidance with resampling.
    VcgSmc,
    /// Energy-controlling guidance without resampling.
    Ecg,
    /// Energy-controlling guidance with resampling.
    EcgSmc,
}

impl Method {
    pub fn weighted(self) -> bool {
        !matches!(self, Method::Pg)
    }

    pub fn control_mode(self) -> Option<ControlMode> {
        match self {
            Method::Vcg | Method::VcgSmc => Some(ControlMode::Vcg),
            Method::Ecg | Method::EcgSmc => Some(ControlMode::Ecg),
            Method::Pg | Method::GSmc => None,
        }
    }

    pub fn resampling(self) -> bool {
        matches!(self, Method::GSmc | Method::VcgSmc | Method::EcgSmc)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Pg => "pg",
            Method::GSmc => "g-smc",
            Method::Vcg => "vcg",
            Method::VcgSmc => "vcg-smc",
            Method::Ecg => "ecg",
            Method::EcgSmc => "ecg-smc",
        }
    }
}

/// How the score Laplacian entering the control bases is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianMode {
    /// Use the model's exact Laplacian; falls back to probing when absent.
    Analytic,
    /// Hutchinson trace estimation with Rademacher probes.
    Hutchinson,
}

/// Optional extra scalar basis for the energy route when the base model
/// lacks a log-density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtraScalarBasis {
    None,
    /// Squared score norm.
    ScoreNorm,
    /// Projection of the score onto a per-step random direction.
    RandomProjection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    pub method: Method,
    pub num_particles: usize,
    /// Resample when the ESS fraction drops below this value.
    pub ess_threshold: Option<f64>,
    /// Resample every this many steps, regardless of ESS.
    pub resample_period: Option<usize>,
    pub seed: u64,
    /// Recorded in run metadata; reductions are ordered either way.
    pub deterministic: bool,
    /// Relative Tikhonov strength for the per-step solve.
    pub ridge: f64,
    pub laplacian: LaplacianMode,
    pub hutchinson_probes: usize,
    pub extra_scalar_basis: ExtraScalarBasis,
    /// Diagnostic switch: assemble and solve, then discard the control.
    /// Makes a controlled method trace the uncontrolled baseline exactly.
    pub force_zero_control: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            method: Method::VcgSmc,
            num_particles: 8192,
            ess_threshold: Some(0.9),
            resample_period: None,
            seed: 0,
            deterministic: true,
            ridge: 1e-6,
            laplacian: LaplacianMode::Analytic,
            hutchinson_probes: 8,
            extra_scalar_basis: ExtraScalarBasis::None,
            force_zero_control: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_particles < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 particles, got {}",
                self.num_particles
            )));
        }
        if let Some(tau) = self.ess_threshold {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "ess threshold must be in (0, 1], got {tau}"
                )));
            }
        }
        if let Some(period) = self.resample_period {
            if period == 0 {
                return Err(Error::InvalidSpec("resample period must be positive".into()));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidSpec(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if self.hutchinson_probes == 0 {
            return Err(Error::InvalidSpec("hutchinson probes must be >= 1".into()));
        }
        if self.extra_scalar_basis != ExtraScalarBasis::None
            && self.method.control_mode() != Some(crate::control::ControlMode::Ecg)
        {
            return Err(Error::InvalidSpec(
                "extra scalar bases only apply to energy-controlled methods".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        EngineConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_threshold() {
        let mut cfg = EngineConfig::default();
        cfg.ess_threshold = Some(1.5);
        assert!(cfg.validate().is_err());
        cfg.ess_threshold = Some(0.0);
        assert!(cfg.validate().is_err());
        cfg.ess_threshold = None;
        cfg.num_particles = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn method_lattice_properties() {
        assert!(!Method::Pg.weighted());
        assert!(Method::GSmc.weighted() && Method::GSmc.resampling());
        assert!(Method::Vcg.weighted() && !Method::Vcg.resampling());
        assert_eq!(Method::VcgSmc.control_mode(), Some(ControlMode::Vcg));
        assert_eq!(Method::EcgSmc.control_mode(), Some(ControlMode::Ecg));
        assert_eq!(Method::GSmc.control_mode(), None);
    }
}
