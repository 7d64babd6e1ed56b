//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use steersmc::metrics::{
    delta_nll, mmd_rff, sliced_wasserstein, summary_stats, WeightedSamples,
};
use steersmc::reference::{posterior_gmm, sample_annealed_gmm};
use steersmc::rngstream::{stream, StreamPurpose};
use steersmc::smc::{Method, ParticleEnsemble, RunTrace, SmcEngine};

use crate::config::{ReferenceSource, RunConfig};
use crate::outputs::{
    read_samples_csv, resolve_out_dir, write_aggregate_csv, write_metrics_json,
    write_reference_csv, write_run_meta, write_samples_csv, write_trace_jsonl, MetricReport,
};

pub struct ReferenceSet {
    pub samples: WeightedSamples,
    pub path: PathBuf,
    pub cache_hit: bool,
    pub warning: Option<String>,
}

/// Load or materialize the reference sample set for a config, cached by a
/// hash of the target identity and reference settings.
pub fn materialize_reference(config: &RunConfig, out_root: &Path) -> Result<Option<ReferenceSet>> {
    match &config.metrics.reference {
        ReferenceSource::None => Ok(None),
        ReferenceSource::Csv(path) => {
            let path = PathBuf::from(path);
            let samples = read_samples_csv(&path, config.target.dim)?;
            Ok(Some(ReferenceSet {
                samples,
                path,
                cache_hit: true,
                warning: None,
            }))
        }
        ReferenceSource::Auto => {
            let refs_dir = out_root.join("refs");
            fs::create_dir_all(&refs_dir)
                .with_context(|| format!("creating {}", refs_dir.display()))?;
            let kind = if config.target.reward.is_some() {
                if config.target.gamma > 1.0 {
                    "annealed-reward"
                } else {
                    "posterior"
                }
            } else {
                "annealed"
            };
            let path = refs_dir.join(format!("{kind}-{}.csv", config.reference_key()?));
            if path.exists() {
                let samples = read_samples_csv(&path, config.target.dim)?;
                return Ok(Some(ReferenceSet {
                    samples,
                    path,
                    cache_hit: true,
                    warning: None,
                }));
            }
            let gmm = config.gmm()?;
            let n = config.metrics.reference_samples;
            let seed = config.metrics.reference_seed;
            let mut warning = None;
            let samples = match (config.reward()?, config.target.gamma > 1.0) {
                (None, _) => {
                    let out = sample_annealed_gmm(&gmm, config.target.gamma, None, n, seed)?;
                    if out.stats.collapsed {
                        warning = Some(format!(
                            "rejection acceptance rate collapsed: {:.3e}",
                            out.stats.rate
                        ));
                    }
                    WeightedSamples::uniform(out.samples, config.target.dim)?
                }
                (Some(reward), false) => {
                    // gamma = 1 tilt: exact closed-form posterior mixture.
                    let post = posterior_gmm(&gmm, &reward)?;
                    let mut rng = stream(seed, StreamPurpose::Reference, 4, 0, 0);
                    let d = config.target.dim;
                    let mut points = vec![0.0; n * d];
                    let mut row = vec![0.0; d];
                    for i in 0..n {
                        post.sample(&mut rng, &mut row);
                        points[i * d..(i + 1) * d].copy_from_slice(&row);
                    }
                    WeightedSamples::uniform(points, d)?
                }
                (Some(reward), true) => {
                    // Mixed task: rejection against the annealed proposal
                    // with the (nonpositive) reward folded into acceptance.
                    let out =
                        sample_annealed_gmm(&gmm, config.target.gamma, Some(&reward), n, seed)?;
                    if out.stats.collapsed {
                        warning = Some(format!(
                            "rejection acceptance rate collapsed: {:.3e}",
                            out.stats.rate
                        ));
                    }
                    WeightedSamples::uniform(out.samples, config.target.dim)?
                }
            };
            write_reference_csv(&path, &samples)?;
            Ok(Some(ReferenceSet {
                samples,
                path,
                cache_hit: false,
                warning,
            }))
        }
    }
}

fn compute_metrics(
    config: &RunConfig,
    method: Method,
    seed: u64,
    ensemble: &ParticleEnsemble,
    trace: &RunTrace,
    reference: Option<&ReferenceSet>,
) -> Result<MetricReport> {
    let samples = WeightedSamples::from_ensemble(ensemble);
    let mut report = MetricReport {
        method: method.name().to_string(),
        seed,
        ess_final: ensemble.ess_fraction(),
        resample_count: trace.records.iter().filter(|r| r.resampled).count(),
        solver_fallbacks: trace.solver_fallbacks.len(),
        ..Default::default()
    };
    if let Some(reference) = reference {
        let m = &config.metrics;
        report.mmd_sq = Some(mmd_rff(
            &samples,
            &reference.samples,
            m.mmd_bandwidth,
            m.rff_features,
            m.rff_seed,
        )?);
        report.swd = Some(sliced_wasserstein(
            &samples,
            &reference.samples,
            m.swd_projections,
            m.swd_seed,
        )?);
        let stats = summary_stats(&samples, &reference.samples)?;
        report.mean_l2 = Some(stats.mean_l2);
        report.cov_frobenius = Some(stats.cov_frobenius);
        let (sched, _) = config.schedule()?;
        let target = config.target_spec(&sched)?;
        if target.final_unnormalized_logpdf(&vec![0.0; target.dim()]).is_some() {
            report.delta_nll = Some(delta_nll(&samples, &reference.samples, |x| {
                target.final_unnormalized_logpdf(x).unwrap()
            }));
        }
    }
    Ok(report)
}

fn run_one(
    config: &RunConfig,
    method: Method,
    seed: u64,
) -> Result<(ParticleEnsemble, Vec<RunTrace>)> {
    let (sched, grid) = config.schedule()?;
    let target = config.target_spec(&sched)?;
    let engine_config = config.engine_config(method, seed);
    let engine = SmcEngine::new(&sched, &grid, &target, &engine_config)?;
    if config.engine.rounds > 1 {
        let (ensemble, traces) = engine.refine(config.engine.rounds)?;
        Ok((ensemble, traces))
    } else {
        let (ensemble, trace) = engine.run()?;
        Ok((ensemble, vec![trace]))
    }
}

/// Execute one method over every seed, writing per-seed outputs into `dir`.
fn run_method_sweep(
    config: &RunConfig,
    method: Method,
    dir: &Path,
    reference: Option<&ReferenceSet>,
) -> Result<Vec<MetricReport>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut reports = Vec::new();
    for &seed in &config.engine.seeds {
        let (ensemble, traces) = run_one(config, method, seed)?;
        let final_trace = traces.last().expect("at least one round");
        write_samples_csv(&dir.join(format!("final_samples_{seed}.csv")), &ensemble)?;
        if traces.len() == 1 {
            write_trace_jsonl(&dir.join(format!("trace_{seed}.jsonl")), final_trace)?;
        } else {
            for (round, trace) in traces.iter().enumerate() {
                write_trace_jsonl(
                    &dir.join(format!("trace_{seed}_round{}.jsonl", round + 1)),
                    trace,
                )?;
            }
        }
        let report = compute_metrics(config, method, seed, &ensemble, final_trace, reference)?;
        write_metrics_json(&dir.join(format!("metrics_{seed}.json")), &report)?;
        println!(
            "{} seed {seed}: {:.2}s wall",
            method.name(),
            traces.iter().map(|t| t.wall_time_secs).sum::<f64>()
        );
        reports.push(report);
    }
    Ok(reports)
}

pub fn cmd_run(config: &RunConfig, out_flag: Option<&Path>) -> Result<()> {
    let out_dir = resolve_out_dir(out_flag, config);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let reference = materialize_reference(config, &out_dir)?;
    if let Some(reference) = &reference {
        if let Some(warning) = &reference.warning {
            eprintln!("warning: {warning}");
        }
    }
    write_run_meta(&out_dir.join("run_meta.json"), config)?;
    let reports = run_method_sweep(config, config.engine.method, &out_dir, reference.as_ref())?;
    if config.engine.seeds.len() > 1 {
        write_aggregate_csv(&out_dir.join("aggregate.csv"), &reports)?;
    }
    for report in &reports {
        println!(
            "{} seed {}: ess {:.3}, resamples {}, mmd_sq {}, mean_l2 {}",
            report.method,
            report.seed,
            report.ess_final,
            report.resample_count,
            report
                .mmd_sq
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "-".into()),
            report
                .mean_l2
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    Ok(())
}

pub fn cmd_compare(config: &RunConfig, out_flag: Option<&Path>) -> Result<()> {
    if config.compare_methods.is_empty() {
        bail!("compare needs at least one method");
    }
    let out_dir = resolve_out_dir(out_flag, config);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    // One shared reference and identical seeds across methods.
    let reference = materialize_reference(config, &out_dir)?;
    if let Some(reference) = &reference {
        if let Some(warning) = &reference.warning {
            eprintln!("warning: {warning}");
        }
    }
    write_run_meta(&out_dir.join("run_meta.json"), config)?;
    let mut all_reports = Vec::new();
    for &method in &config.compare_methods {
        let method_dir = out_dir.join(method.name());
        let reports = run_method_sweep(config, method, &method_dir, reference.as_ref())?;
        all_reports.extend(reports);
    }
    write_aggregate_csv(&out_dir.join("compare.csv"), &all_reports)?;
    println!("wrote {}", out_dir.join("compare.csv").display());
    Ok(())
}

pub fn cmd_reference(config: &RunConfig, out_flag: Option<&Path>) -> Result<()> {
    let out_dir = resolve_out_dir(out_flag, config);
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    match materialize_reference(config, &out_dir)? {
        None => bail!("metrics.reference is 'none'; nothing to materialize"),
        Some(reference) => {
            if let Some(warning) = &reference.warning {
                eprintln!("warning: {warning}");
            }
            println!(
                "{} ({} samples, cache {})",
                reference.path.display(),
                reference.samples.len(),
                if reference.cache_hit { "hit" } else { "miss" }
            );
        }
    }
    Ok(())
}

pub fn cmd_aggregate(dir: &Path, out: Option<&Path>) -> Result<()> {
    let mut reports = Vec::new();
    collect_metrics_files(dir, &mut reports, 0)?;
    if reports.is_empty() {
        bail!("no metrics_*.json files found under {}", dir.display());
    }
    reports.sort_by(|a, b| (a.method.clone(), a.seed).cmp(&(b.method.clone(), b.seed)));
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join("aggregate.csv"));
    write_aggregate_csv(&out_path, &reports)?;
    println!("wrote {} ({} reports)", out_path.display(), reports.len());
    Ok(())
}

fn collect_metrics_files(dir: &Path, reports: &mut Vec<MetricReport>, depth: usize) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() && depth < 2 {
            collect_metrics_files(&path, reports, depth + 1)?;
        } else if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if name.starts_with("metrics_") && name.ends_with(".json") {
                reports.push(crate::outputs::read_metrics_json(&path)?);
            }
        }
    }
    Ok(())
}
