//! Run configuration: a single TOML tree with every default baked in, so a
//! ten-line file reproduces a full experiment.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use steersmc::rngstream::{stream, StreamPurpose};
use steersmc::schedule::{DiffusionSchedule, TimeGrid};
use steersmc::smc::{EngineConfig, ExtraScalarBasis, LaplacianMode, Method};
use steersmc::targets::{GmmSpec, QuadraticReward, RewardSchedule, TargetSpec};

fn default_sigma_min() -> f64 {
    0.005
}
fn default_sigma_max() -> f64 {
    50.0
}
fn default_rho() -> f64 {
    7.0
}
fn default_churn() -> f64 {
    1.0
}
fn default_steps() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    #[serde(default = "default_sigma_max")]
    pub sigma_max: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_churn")]
    pub churn: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            sigma_min: default_sigma_min(),
            sigma_max: default_sigma_max(),
            rho: default_rho(),
            churn: default_churn(),
            steps: default_steps(),
        }
    }
}

fn default_dim() -> usize {
    30
}
fn default_components() -> usize {
    40
}
fn default_component_variance() -> f64 {
    50.0
}
fn default_mean_range() -> f64 {
    40.0
}
fn default_gmm_seed() -> u64 {
    7
}
fn default_gamma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub scale: f64,
    /// Explicit center; wins over the seeded draw.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default = "default_center_seed")]
    pub center_seed: u64,
    /// Standard deviation of the seeded center draw.
    #[serde(default = "default_center_std")]
    pub center_std: f64,
}

fn default_center_seed() -> u64 {
    21
}
fn default_center_std() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Base mixture dimensionality.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_components")]
    pub components: usize,
    #[serde(default = "default_component_variance")]
    pub component_variance: f64,
    /// Means are drawn from `Unif([-mean_range, mean_range]^dim)`.
    #[serde(default = "default_mean_range")]
    pub mean_range: f64,
    /// Recorded seed for the mean draw; reference oracles see the same spec.
    #[serde(default = "default_gmm_seed")]
    pub gmm_seed: u64,
    /// Optional CSV of means (one row per component), for bit-exact
    /// cross-implementation comparison. Overrides the seeded draw.
    #[serde(default)]
    pub means_csv: Option<String>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub reward: Option<RewardConfig>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            components: default_components(),
            component_variance: default_component_variance(),
            mean_range: default_mean_range(),
            gmm_seed: default_gmm_seed(),
            means_csv: None,
            gamma: default_gamma(),
            reward: None,
        }
    }
}

fn default_particles() -> usize {
    8192
}
fn default_ess_threshold() -> Option<f64> {
    Some(0.9)
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_true() -> bool {
    true
}
fn default_ridge() -> f64 {
    1e-6
}
fn default_probes() -> usize {
    8
}
fn default_rounds() -> usize {
    1
}
fn default_laplacian() -> LaplacianMode {
    LaplacianMode::Analytic
}
fn default_extra_basis() -> ExtraScalarBasis {
    ExtraScalarBasis::None
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineBlock {
    pub method: Method,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_ess_threshold")]
    pub ess_threshold: Option<f64>,
    #[serde(default)]
    pub resample_period: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_laplacian")]
    pub laplacian: LaplacianMode,
    #[serde(default = "default_probes")]
    pub hutchinson_probes: usize,
    #[serde(default = "default_extra_basis")]
    pub extra_scalar_basis: ExtraScalarBasis,
    /// Refinement rounds; 1 is a plain run.
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Diagnostic: solve but discard the control.
    #[serde(default)]
    pub force_zero_control: bool,
}

fn default_reference_samples() -> usize {
    100_000
}
fn default_reference_seed() -> u64 {
    1000
}
fn default_rff_features() -> usize {
    2048
}
fn default_rff_seed() -> u64 {
    99
}
fn default_mmd_bandwidth() -> f64 {
    20.0
}
fn default_swd_projections() -> usize {
    10
}
fn default_swd_seed() -> u64 {
    17
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// `auto` picks rejection sampling for annealing and the closed-form
    /// posterior for reward tilting; `none` skips metrics; a path loads
    /// reference samples from CSV.
    #[serde(default)]
    pub reference: ReferenceSource,
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_reference_seed")]
    pub reference_seed: u64,
    #[serde(default = "default_rff_features")]
    pub rff_features: usize,
    #[serde(default = "default_rff_seed")]
    pub rff_seed: u64,
    #[serde(default = "default_mmd_bandwidth")]
    pub mmd_bandwidth: f64,
    #[serde(default = "default_swd_projections")]
    pub swd_projections: usize,
    #[serde(default = "default_swd_seed")]
    pub swd_seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            reference: ReferenceSource::Auto,
            reference_samples: default_reference_samples(),
            reference_seed: default_reference_seed(),
            rff_features: default_rff_features(),
            rff_seed: default_rff_seed(),
            mmd_bandwidth: default_mmd_bandwidth(),
            swd_projections: default_swd_projections(),
            swd_seed: default_swd_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSource {
    Auto,
    None,
    /// CSV path with `x0..x{d-1},weight` columns.
    Csv(String),
}

impl Default for ReferenceSource {
    fn default() -> Self {
        Self::Auto
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub target: TargetConfig,
    pub engine: EngineBlock,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Methods for `compare`; defaults to the full lattice.
    #[serde(default = "default_compare_methods")]
    pub compare_methods: Vec<Method>,
}

fn default_compare_methods() -> Vec<Method> {
    vec![
        Method::Pg,
        Method::GSmc,
        Method::Vcg,
        Method::VcgSmc,
        Method::Ecg,
        Method::EcgSmc,
    ]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out` and then `STEERSMC_OUT` take precedence
    /// chain: flag > config > env > ./runs.
    #[serde(default)]
    pub dir: Option<String>,
}

impl RunConfig {
    /// Parse a TOML config, or a JSON `run_meta.json` (whose embedded config
    /// reproduces the original run).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let value: serde_json::Value =
                serde_json::from_str(&text).context("parsing JSON config")?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner).context("parsing config object")?
        } else {
            toml::from_str(&text).context("parsing TOML config")?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.engine.seeds.is_empty() {
            bail!("engine.seeds must list at least one seed");
        }
        if self.target.components == 0 || self.target.dim == 0 {
            bail!("target needs at least one component and one dimension");
        }
        if let Some(path) = &self.target.means_csv {
            if !Path::new(path).exists() {
                bail!("target.means_csv does not exist: {path}");
            }
        }
        if let ReferenceSource::Csv(path) = &self.metrics.reference {
            if !Path::new(path).exists() {
                bail!("metrics.reference CSV does not exist: {path}");
            }
        }
        if self.target.gamma < 1.0 {
            bail!("target.gamma must be >= 1");
        }
        if self.engine.rounds == 0 {
            bail!("engine.rounds must be >= 1");
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<(DiffusionSchedule, TimeGrid)> {
        let sched = DiffusionSchedule {
            sigma_min: self.schedule.sigma_min,
            sigma_max: self.schedule.sigma_max,
            rho: self.schedule.rho,
            churn: self.schedule.churn,
        };
        let grid = TimeGrid::build(&sched, self.schedule.steps)?;
        Ok((sched, grid))
    }

    pub fn gmm(&self) -> Result<GmmSpec> {
        let t = &self.target;
        if let Some(path) = &t.means_csv {
            let means = load_means_csv(Path::new(path), t.dim)?;
            let k = means.len() / t.dim;
            Ok(GmmSpec::new(
                t.dim,
                means,
                t.component_variance,
                vec![1.0 / k as f64; k],
            )?)
        } else {
            Ok(GmmSpec::sample_uniform_means(
                t.dim,
                t.components,
                t.mean_range,
                t.component_variance,
                t.gmm_seed,
            )?)
        }
    }

    pub fn reward(&self) -> Result<Option<QuadraticReward>> {
        match &self.target.reward {
            None => Ok(None),
            Some(cfg) => {
                let center = match &cfg.center {
                    Some(c) => {
                        if c.len() != self.target.dim {
                            bail!(
                                "reward center has {} entries, target dim is {}",
                                c.len(),
                                self.target.dim
                            );
                        }
                        c.clone()
                    }
                    None => {
                        let mut rng = stream(cfg.center_seed, StreamPurpose::Reference, 0, 1, 0);
                        (0..self.target.dim)
                            .map(|_| cfg.center_std * rng.sample::<f64, _>(StandardNormal))
                            .collect()
                    }
                };
                Ok(Some(QuadraticReward::new(center, cfg.scale)?))
            }
        }
    }

    pub fn target_spec(&self, sched: &DiffusionSchedule) -> Result<TargetSpec> {
        let gmm = self.gmm()?;
        match self.reward()? {
            None => Ok(TargetSpec::annealed_gmm(gmm, self.target.gamma)?),
            Some(reward) => {
                let schedule = RewardSchedule::linear(sched.horizon())?;
                Ok(TargetSpec::rewarded_gmm(
                    gmm,
                    self.target.gamma,
                    reward,
                    schedule,
                )?)
            }
        }
    }

    pub fn engine_config(&self, method: Method, seed: u64) -> EngineConfig {
        EngineConfig {
            method,
            num_particles: self.engine.particles,
            ess_threshold: self.engine.ess_threshold,
            resample_period: self.engine.resample_period,
            seed,
            deterministic: self.engine.deterministic,
            ridge: self.engine.ridge,
            laplacian: self.engine.laplacian,
            hutchinson_probes: self.engine.hutchinson_probes,
            extra_scalar_basis: self.engine.extra_scalar_basis,
            force_zero_control: self.engine.force_zero_control,
        }
    }

    /// Hash of the resolved configuration, for run metadata and cache keys.
    pub fn hash(&self) -> Result<String> {
        let canonical = serde_json::to_vec(self).context("serializing config for hashing")?;
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        Ok(hex_prefix(&hasher.finalize(), 16))
    }

    /// Cache key for the reference sample set: target identity plus
    /// reference size and seed (independent of engine settings).
    pub fn reference_key(&self) -> Result<String> {
        let relevant = serde_json::json!({
            "target": self.target,
            "reference_samples": self.metrics.reference_samples,
            "reference_seed": self.metrics.reference_seed,
        });
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&relevant)?);
        Ok(hex_prefix(&hasher.finalize(), 16))
    }

}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

fn load_means_csv(path: &Path, dim: usize) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("opening means CSV {}", path.display()))?;
    let mut means = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != dim {
            bail!(
                "means CSV row {row} has {} columns, expected {dim}",
                record.len()
            );
        }
        for field in record.iter() {
            means.push(field.trim().parse::<f64>().with_context(|| {
                format!("parsing means CSV row {row}")
            })?);
        }
    }
    if means.is_empty() {
        bail!("means CSV {} is empty", path.display());
    }
    Ok(means)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [engine]
            method = "vcg-smc"
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.schedule.steps, 500);
        assert_eq!(cfg.engine.particles, 8192);
        assert_eq!(cfg.engine.seeds, vec![0]);
        assert_eq!(cfg.target.components, 40);
        assert_eq!(cfg.metrics.rff_features, 2048);
    }

    #[test]
    fn unknown_method_is_rejected() {
        let parsed: Result<RunConfig, _> = toml::from_str(
            r#"
            [engine]
            method = "warp-drive"
            "#,
        );
        assert!(parsed.is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a: RunConfig = toml::from_str("[engine]\nmethod = \"pg\"").unwrap();
        let b: RunConfig = toml::from_str("[engine]\nmethod = \"pg\"").unwrap();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        let c: RunConfig = toml::from_str("[engine]\nmethod = \"g-smc\"").unwrap();
        assert_ne!(a.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn reward_target_builds() {
        let cfg: RunConfig = toml::from_str(
            r#"
            [target]
            dim = 4
            components = 3
            gamma = 1.0
            [target.reward]
            scale = 100.0
            [engine]
            method = "vcg-smc"
            "#,
        )
        .unwrap();
        let (sched, _) = cfg.schedule().unwrap();
        let target = cfg.target_spec(&sched).unwrap();
        assert!(target.has_reward());
        assert_eq!(target.dim(), 4);
    }
}
