//! File emission: sample CSVs, JSONL traces, metric reports, run metadata,
//! and the cached reference sets.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use steersmc::metrics::WeightedSamples;
use steersmc::smc::{ParticleEnsemble, RunTrace};

use crate::config::RunConfig;

/// Flat per-run metric report; `mmd_sq` is the squared MMD (raw, unscaled).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub seed: u64,
    pub delta_nll: Option<f64>,
    pub mmd_sq: Option<f64>,
    pub swd: Option<f64>,
    pub mean_l2: Option<f64>,
    pub cov_frobenius: Option<f64>,
    pub ess_final: f64,
    pub resample_count: usize,
    pub solver_fallbacks: usize,
}

impl MetricReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "delta_nll" => self.delta_nll,
            "mmd_sq" => self.mmd_sq,
            "swd" => self.swd,
            "mean_l2" => self.mean_l2,
            "cov_frobenius" => self.cov_frobenius,
            _ => None,
        }
    }
}

pub const METRIC_COLUMNS: [&str; 5] = ["delta_nll", "mmd_sq", "swd", "mean_l2", "cov_frobenius"];

pub fn write_samples_csv(path: &Path, ensemble: &ParticleEnsemble) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let d = ensemble.dim();
    let mut header = String::new();
    for a in 0..d {
        header.push_str(&format!("x{a},"));
    }
    header.push_str("weight");
    writeln!(out, "{header}")?;
    let weights = ensemble.weights();
    for i in 0..ensemble.num_particles() {
        let mut row = String::new();
        for v in ensemble.position(i) {
            row.push_str(&format!("{v},"));
        }
        row.push_str(&format!("{}", weights[i]));
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn write_reference_csv(path: &Path, samples: &WeightedSamples) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let d = samples.dim();
    let mut header = String::new();
    for a in 0..d {
        header.push_str(&format!("x{a},"));
    }
    header.push_str("weight");
    writeln!(out, "{header}")?;
    for i in 0..samples.len() {
        let mut row = String::new();
        for v in samples.point(i) {
            row.push_str(&format!("{v},"));
        }
        row.push_str(&format!("{}", samples.weights()[i]));
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn read_samples_csv(path: &Path, dim: usize) -> Result<WeightedSamples> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening samples CSV {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.len() != dim + 1 {
        bail!(
            "samples CSV {} has {} columns, expected {} (+weight)",
            path.display(),
            headers.len(),
            dim
        );
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for record in reader.records() {
        let record = record?;
        for field in record.iter().take(dim) {
            points.push(field.parse::<f64>()?);
        }
        weights.push(record[dim].parse::<f64>()?);
    }
    // Renormalize against accumulated rounding from the text round-trip.
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        bail!("samples CSV {} has nonpositive total weight", path.display());
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(WeightedSamples::new(points, weights, dim)?)
}

pub fn write_trace_jsonl(path: &Path, trace: &RunTrace) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for record in &trace.records {
        serde_json::to_writer(&mut out, record)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_metrics_json(path: &Path, report: &MetricReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_metrics_json(path: &Path) -> Result<MetricReport> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Run metadata: the resolved config (re-runnable via `--config`), its hash,
/// the crate version, and the resolved design switches.
#[derive(Debug, Serialize)]
pub struct RunMeta<'a> {
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub version: &'static str,
    pub flags: MetaFlags,
}

#[derive(Debug, Serialize)]
pub struct MetaFlags {
    pub moment_centering: &'static str,
    pub resampling: &'static str,
    pub rng: &'static str,
    pub init: &'static str,
    pub mmd_scale: &'static str,
}

impl Default for MetaFlags {
    fn default() -> Self {
        Self {
            moment_centering: "empirical (weighted means subtracted in A and c)",
            resampling: "systematic, single uniform, 1/N strides",
            rng: "counter-based streams keyed by (seed, purpose, round, step, particle)",
            init: "exact noised base marginal for analytic mixtures, N(0, sigma_max^2 I) otherwise",
            mmd_scale: "mmd_sq is squared MMD, unscaled",
        }
    }
}

pub fn write_run_meta(path: &Path, config: &RunConfig) -> Result<()> {
    let meta = RunMeta {
        config,
        config_hash: config.hash()?,
        version: env!("CARGO_PKG_VERSION"),
        flags: MetaFlags::default(),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Aggregate rows of per-seed reports into mean/std columns per metric,
/// one row per method.
pub fn write_aggregate_csv(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut methods: Vec<String> = reports.iter().map(|r| r.method.clone()).collect();
    methods.dedup();
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let mut header = String::from("method,seeds");
    for col in METRIC_COLUMNS {
        header.push_str(&format!(",{col}_mean,{col}_std"));
    }
    writeln!(out, "{header}")?;
    for method in methods {
        let rows: Vec<&MetricReport> = reports.iter().filter(|r| r.method == method).collect();
        let mut line = format!("{method},{}", rows.len());
        for col in METRIC_COLUMNS {
            let values: Vec<f64> = rows.iter().filter_map(|r| r.metric(col)).collect();
            if values.is_empty() {
                line.push_str(",,");
                continue;
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / values.len() as f64;
            line.push_str(&format!(",{mean},{}", var.sqrt()));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Output root resolution: `--out` flag, then config, then `STEERSMC_OUT`,
/// then `./runs`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = &config.output.dir {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("STEERSMC_OUT") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("runs")
}
