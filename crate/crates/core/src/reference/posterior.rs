//! Closed-form posterior of an isotropic mixture under a quadratic reward.
//!
//! Tilting `sum_i w_i N(mu_i, v I)` by the Gaussian likelihood
//! `exp(r) = exp(-||x - c||^2 / (2 s))` keeps the mixture form: shared
//! posterior variance `(1/s + 1/v)^-1`, precision-averaged component means,
//! and weights rescaled by each component's evidence.

use crate::error::{Error, Result};
use crate::math::logsumexp;
use crate::targets::{GmmSpec, QuadraticReward};

/// Exact posterior mixture for `q proportional to p(x) exp(r(x))`.
pub fn posterior_gmm(gmm: &GmmSpec, reward: &QuadraticReward) -> Result<GmmSpec> {
    if reward.dim() != gmm.dim() {
        return Err(Error::DimensionMismatch {
            expected: gmm.dim(),
            got: reward.dim(),
            context: "posterior reward",
        });
    }
    let v = gmm.component_variance();
    let s = reward.scale;
    let post_var = 1.0 / (1.0 / s + 1.0 / v);
    let evidence_var = s + v;

    let k = gmm.num_components();
    let d = gmm.dim();
    let mut means = Vec::with_capacity(k * d);
    let mut log_weights = Vec::with_capacity(k);
    for i in 0..k {
        let mu = gmm.mean(i);
        let mut sq = 0.0;
        for (m, c) in mu.iter().zip(&reward.center) {
            means.push(post_var * (m / v + c / s));
            let diff = m - c;
            sq += diff * diff;
        }
        log_weights.push(gmm.weights()[i].ln() - 0.5 * sq / evidence_var);
    }
    let lse = logsumexp(&log_weights);
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - lse).exp()).collect();
    GmmSpec::new(d, means, post_var, weights)
}
