//! Distribution-distance metrics over weighted sample sets.
//!
//! All metrics operate on [`WeightedSamples`] and are zero on identical
//! inputs (given shared random feature or projection draws). The MMD is
//! always reported as the raw squared quantity; headers and field names say
//! so explicitly to keep table scales unambiguous.

mod mmd;
mod rdf;
mod wasserstein;

pub use mmd::{mmd_rff, mmd_sq_exact, rbf_kernel, RffMap};
pub use rdf::{rdf, rdf_histogram};
pub use wasserstein::{sliced_wasserstein, unit_directions, w1_1d};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{weighted_covariance, weighted_mean_vec};
use crate::smc::ParticleEnsemble;

/// `N` points in `d` dimensions with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSamples {
    points: Vec<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl WeightedSamples {
    pub fn new(points: Vec<f64>, weights: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::InvalidSpec(format!(
                "points length {} not a multiple of dim {dim}",
                points.len()
            )));
        }
        if points.len() / dim != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len() / dim,
                got: weights.len(),
                context: "sample weights",
            });
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidSpec("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "weights must sum to 1 within 1e-9 (got {total})"
            )));
        }
        Ok(Self {
            points,
            weights,
            dim,
        })
    }

    /// Equal weights.
    pub fn uniform(points: Vec<f64>, dim: usize) -> Result<Self> {
        let n = points.len() / dim.max(1);
        Self::new(points, vec![1.0 / n as f64; n], dim)
    }

    pub fn from_ensemble(ensemble: &ParticleEnsemble) -> Self {
        Self {
            points: ensemble.positions().to_vec(),
            weights: ensemble.weights(),
            dim: ensemble.dim(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Difference of weighted mean negative log-densities,
/// `NLL(a) - NLL(b)`, under a shared unnormalized log-density. The unknown
/// normalizer cancels in the difference.
pub fn delta_nll<F>(a: &WeightedSamples, b: &WeightedSamples, log_density: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let nll = |s: &WeightedSamples| -> f64 {
        let terms: Vec<f64> = (0..s.len())
            .into_par_iter()
            .map(|i| s.weights()[i] * log_density(s.point(i)))
            .collect();
        -terms.iter().sum::<f64>()
    };
    nll(a) - nll(b)
}

/// Low-order moment discrepancies against a reference set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    /// Euclidean distance between weighted means.
    pub mean_l2: f64,
    /// Frobenius distance between weighted covariance matrices.
    pub cov_frobenius: f64,
}

pub fn summary_stats(a: &WeightedSamples, reference: &WeightedSamples) -> Result<SummaryStats> {
    if a.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            got: a.dim(),
            context: "summary stats dimensions",
        });
    }
    let d = a.dim();
    let mean_a = weighted_mean_vec(a.weights(), a.points(), d);
    let mean_b = weighted_mean_vec(reference.weights(), reference.points(), d);
    let mean_l2 = mean_a
        .iter()
        .zip(&mean_b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let cov_a = weighted_covariance(a.weights(), a.points(), d);
    let cov_b = weighted_covariance(reference.weights(), reference.points(), d);
    let cov_frobenius = cov_a
        .iter()
        .zip(&cov_b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(SummaryStats {
        mean_l2,
        cov_frobenius,
    })
}
