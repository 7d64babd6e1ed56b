//! Ensemble-averaged interparticle distance distribution.

use super::WeightedSamples;
use crate::error::{Error, Result};

/// All pairwise distances of every configuration, each carrying its
/// configuration's weight split evenly over the `n(n-1)/2` pairs. The
/// result is a weighted 1-D distribution (weights sum to one); distance
/// comparisons should use it unbinned.
pub fn rdf(
    configs: &WeightedSamples,
    n_particles: usize,
    dim: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_particles < 2 {
        return Err(Error::InvalidSpec("rdf needs at least two particles".into()));
    }
    if configs.dim() != n_particles * dim {
        return Err(Error::DimensionMismatch {
            expected: n_particles * dim,
            got: configs.dim(),
            context: "rdf configuration layout",
        });
    }
    let pairs = n_particles * (n_particles - 1) / 2;
    let mut distances = Vec::with_capacity(configs.len() * pairs);
    let mut weights = Vec::with_capacity(configs.len() * pairs);
    for c in 0..configs.len() {
        let x = configs.point(c);
        let w = configs.weights()[c] / pairs as f64;
        for i in 0..n_particles {
            for j in (i + 1)..n_particles {
                let mut sq = 0.0;
                for a in 0..dim {
                    let diff = x[i * dim + a] - x[j * dim + a];
                    sq += diff * diff;
                }
                distances.push(sq.sqrt());
                weights.push(w);
            }
        }
    }
    Ok((distances, weights))
}

/// Histogram of a weighted distance set over uniform bins on
/// `[0, max distance]`; for plotting only, distance metrics use the
/// unbinned samples.
pub fn rdf_histogram(distances: &[f64], weights: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(bins >= 1);
    let max = distances.iter().copied().fold(0.0f64, f64::max);
    let width = (max / bins as f64).max(f64::MIN_POSITIVE);
    let mut masses = vec![0.0; bins];
    for (d, w) in distances.iter().zip(weights) {
        let mut b = (d / width) as usize;
        if b >= bins {
            b = bins - 1;
        }
        masses[b] += w;
    }
    let centers = (0..bins).map(|b| (b as f64 + 0.5) * width).collect();
    (centers, masses)
}
