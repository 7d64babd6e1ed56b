//! One-dimensional Wasserstein distances and the sliced variant.
//!
//! The 1-D distances are computed by the quantile coupling: sort both
//! weighted sets, then integrate |quantile difference|^p over merged
//! cumulative-weight breakpoints. The sliced distance projects onto random
//! unit directions and averages the squared 1-D W2.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::WeightedSamples;
use crate::error::{Error, Result};
use crate::math::norm_sq;
use crate::rngstream::{stream, StreamPurpose};

fn sorted_by_value(values: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    (
        idx.iter().map(|&i| values[i]).collect(),
        idx.iter().map(|&i| weights[i]).collect(),
    )
}

/// Integral of `|Fa^-1(u) - Fb^-1(u)|^p du` over `u in [0, 1]`.
fn quantile_integral(
    values_a: &[f64],
    weights_a: &[f64],
    values_b: &[f64],
    weights_b: &[f64],
    p: u32,
) -> f64 {
    let (va, wa) = sorted_by_value(values_a, weights_a);
    let (vb, wb) = sorted_by_value(values_b, weights_b);
    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut cum_a = wa[0];
    let mut cum_b = wb[0];
    let mut u = 0.0;
    let mut total = 0.0;
    loop {
        let next = cum_a.min(cum_b).min(1.0);
        let seg = next - u;
        if seg > 0.0 {
            let diff = (va[ia] - vb[ib]).abs();
            total += seg * diff.powi(p as i32);
        }
        u = next;
        if u >= 1.0 - 1e-15 {
            break;
        }
        if cum_a <= cum_b && ia + 1 < va.len() {
            ia += 1;
            cum_a += wa[ia];
        } else if ib + 1 < vb.len() {
            ib += 1;
            cum_b += wb[ib];
        } else if ia + 1 < va.len() {
            ia += 1;
            cum_a += wa[ia];
        } else {
            break;
        }
    }
    total
}

/// 1-Wasserstein distance between weighted scalar samples.
pub fn w1_1d(values_a: &[f64], weights_a: &[f64], values_b: &[f64], weights_b: &[f64]) -> f64 {
    quantile_integral(values_a, weights_a, values_b, weights_b, 1)
}

/// Squared 2-Wasserstein distance between weighted scalar samples.
pub fn w2_sq_1d(values_a: &[f64], weights_a: &[f64], values_b: &[f64], weights_b: &[f64]) -> f64 {
    quantile_integral(values_a, weights_a, values_b, weights_b, 2)
}

/// `count` unit directions in `dim` dimensions (flat `count x dim`),
/// drawn as normalized Gaussians. Exposed so tests and reports can share
/// the projection draw with the metric.
pub fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, StreamPurpose::Metric, 0, 1, 0);
    let mut dirs = vec![0.0; count * dim];
    for chunk in dirs.chunks_mut(dim) {
        loop {
            for v in chunk.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = norm_sq(chunk).sqrt();
            if norm > 1e-12 {
                chunk.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
    }
    dirs
}

/// Sliced 2-Wasserstein distance: root of the mean squared 1-D W2 over
/// random unit projections.
pub fn sliced_wasserstein(
    a: &WeightedSamples,
    b: &WeightedSamples,
    projections: usize,
    seed: u64,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
            context: "sliced wasserstein dimensions",
        });
    }
    if projections == 0 {
        return Err(Error::InvalidSpec("need at least one projection".into()));
    }
    let dim = a.dim();
    let dirs = unit_directions(dim, projections, seed);
    let total: f64 = dirs
        .par_chunks(dim)
        .map(|dir| {
            let proj = |s: &WeightedSamples| -> Vec<f64> {
                (0..s.len())
                    .map(|i| s.point(i).iter().zip(dir).map(|(x, d)| x * d).sum())
                    .collect()
            };
            let pa = proj(a);
            let pb = proj(b);
            w2_sq_1d(&pa, a.weights(), &pb, b.weights())
        })
        .sum();
    Ok((total / projections as f64).sqrt())
}
