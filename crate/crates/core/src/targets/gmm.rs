//! Isotropic Gaussian mixtures with analytic diffused densities.
//!
//! Convolving each component `N(mu_i, v I)` with forward noise `N(0, sigma^2 I)`
//! keeps the mixture form with per-component variance `v + sigma^2`, so the
//! log-density, score, and score Laplacian of the diffused base are all exact.
//! Everything runs in log space; 30-dimensional component densities underflow
//! raw floats long before they stop mattering.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::logsumexp;
use crate::rngstream::{stream, StreamPurpose};

#[derive(Debug, Clone, PartialEq)]
pub struct GmmSpec {
    dim: usize,
    /// Flat `k x d` component means.
    means: Vec<f64>,
    /// Shared isotropic component variance.
    component_variance: f64,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

/// Fused evaluation of the diffused mixture at one point.
#[derive(Debug, Clone)]
pub struct GmmEval {
    pub logpdf: f64,
    pub score: Vec<f64>,
    pub score_laplacian: f64,
}

impl GmmSpec {
    pub fn new(dim: usize, means: Vec<f64>, component_variance: f64, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("gmm dimension must be positive".into()));
        }
        if means.is_empty() || means.len() % dim != 0 {
            return Err(Error::InvalidSpec(format!(
                "means length {} is not a multiple of dim {}",
                means.len(),
                dim
            )));
        }
        let k = means.len() / dim;
        if weights.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: weights.len(),
                context: "gmm weights",
            });
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidSpec("gmm weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!(
                "gmm weights must sum to 1 (got {total})"
            )));
        }
        if !(component_variance > 0.0) {
            return Err(Error::InvalidSpec("component variance must be positive".into()));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            dim,
            means,
            component_variance,
            weights,
            log_weights,
        })
    }

    /// Equal-weight mixture with means drawn from `Unif([-range, range]^d)`.
    ///
    /// The seed is part of the experiment spec: reference oracles must see
    /// exactly the same mixture as the engine.
    pub fn sample_uniform_means(
        dim: usize,
        components: usize,
        range: f64,
        component_variance: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = stream(seed, StreamPurpose::Reference, 0, 0, 0);
        let means: Vec<f64> = (0..dim * components)
            .map(|_| rng.gen_range(-range..range))
            .collect();
        let weights = vec![1.0 / components as f64; components];
        Self::new(dim, means, component_variance, weights)
    }

    /// Single-component convenience constructor.
    pub fn single(mean: Vec<f64>, component_variance: f64) -> Result<Self> {
        let dim = mean.len();
        Self::new(dim, mean, component_variance, vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn component_variance(&self) -> f64 {
        self.component_variance
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, i: usize) -> &[f64] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    /// Component log-densities of the diffused mixture (including mixture weights).
    fn component_terms(&self, sigma: f64, x: &[f64]) -> Vec<f64> {
        let var = self.component_variance + sigma * sigma;
        let log_norm = -0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * var).ln();
        (0..self.num_components())
            .map(|i| {
                let mu = self.mean(i);
                let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                self.log_weights[i] + log_norm - 0.5 * sq / var
            })
            .collect()
    }

    /// Posterior component responsibilities at `x` under noise level `sigma`.
    pub fn responsibilities(&self, sigma: f64, x: &[f64]) -> Vec<f64> {
        let terms = self.component_terms(sigma, x);
        let lse = logsumexp(&terms);
        terms.iter().map(|t| (t - lse).exp()).collect()
    }

    /// `log p_sigma(x)` of the diffused mixture.
    pub fn diffused_logpdf(&self, sigma: f64, x: &[f64]) -> f64 {
        logsumexp(&self.component_terms(sigma, x))
    }

    /// Gradient of `diffused_logpdf` written into `out`.
    pub fn diffused_score(&self, sigma: f64, x: &[f64], out: &mut [f64]) {
        let eval = self.evaluate(sigma, x);
        out.copy_from_slice(&eval.score);
    }

    /// Laplacian of `diffused_logpdf`.
    pub fn diffused_score_laplacian(&self, sigma: f64, x: &[f64]) -> f64 {
        self.evaluate(sigma, x).score_laplacian
    }

    /// One-pass log-density, score, and Laplacian.
    ///
    /// With responsibilities `pi_i` and per-component variance `c`:
    /// score `= sum_i pi_i (mu_i - x) / c` and
    /// `lap log p = sum_i pi_i (-d/c + ||mu_i - x||^2 / c^2) - ||score||^2`.
    pub fn evaluate(&self, sigma: f64, x: &[f64]) -> GmmEval {
        let mut score = vec![0.0; self.dim];
        let (logpdf, score_laplacian) = self.evaluate_into(sigma, x, &mut score);
        GmmEval {
            logpdf,
            score,
            score_laplacian,
        }
    }

    /// Allocation-free variant of [`Self::evaluate`]: writes the score into
    /// `score_out` and returns `(logpdf, score_laplacian)`.
    pub fn evaluate_into(&self, sigma: f64, x: &[f64], score_out: &mut [f64]) -> (f64, f64) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(score_out.len(), self.dim);
        let var = self.component_variance + sigma * sigma;
        let terms = self.component_terms(sigma, x);
        let logpdf = logsumexp(&terms);
        score_out.fill(0.0);
        let mut lap = 0.0;
        for (i, term) in terms.iter().enumerate() {
            let pi = (term - logpdf).exp();
            let mu = self.mean(i);
            let mut sq = 0.0;
            for (s, (xi, mi)) in score_out.iter_mut().zip(x.iter().zip(mu)) {
                let diff = mi - xi;
                sq += diff * diff;
                *s += pi * diff / var;
            }
            lap += pi * (-(self.dim as f64) / var + sq / (var * var));
        }
        let score_norm_sq: f64 = score_out.iter().map(|s| s * s).sum();
        (logpdf, lap - score_norm_sq)
    }

    /// Exact draw from the (undiffused) mixture.
    pub fn sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut comp = self.num_components() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = i;
                break;
            }
        }
        let std = self.component_variance.sqrt();
        let mu = &self.means[comp * self.dim..(comp + 1) * self.dim];
        for (o, m) in out.iter_mut().zip(mu) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + std * z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TAU: f64 = 2.0 * std::f64::consts::PI;

    #[test]
    fn single_component_logpdf_at_mean() {
        let d = 30;
        let gmm = GmmSpec::single(vec![0.0; d], 50.0).unwrap();
        let got = gmm.diffused_logpdf(0.0, &vec![0.0; d]);
        let want = -(d as f64 / 2.0) * (TAU * 50.0).ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn diffusion_adds_variance() {
        let d = 4;
        let gmm = GmmSpec::single(vec![0.0; d], 50.0).unwrap();
        let x = vec![1.5; d];
        let got = gmm.diffused_logpdf(5.0, &x);
        let var = 75.0;
        let want = -(d as f64 / 2.0) * (TAU * var).ln() - 0.5 * (d as f64) * 1.5 * 1.5 / var;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn two_far_components_at_one_mean() {
        // Direct two-term evaluation: at a mean of one of two equal, far-apart
        // components, the other term is exp(-large) and the value is
        // log(1/2) + peak.
        let d = 2;
        let means = vec![0.0, 0.0, 1000.0, 1000.0];
        let gmm = GmmSpec::new(d, means, 50.0, vec![0.5, 0.5]).unwrap();
        let x = [0.0, 0.0];
        let peak = -(d as f64 / 2.0) * (TAU * 50.0).ln();
        let far: f64 = peak - (1000.0f64.powi(2) * 2.0) / (2.0 * 50.0);
        let want = logsumexp(&[0.5f64.ln() + peak, 0.5f64.ln() + far]);
        let got = gmm.diffused_logpdf(0.0, &x);
        assert!((got - want).abs() < 1e-12);
        assert!((got - (0.5f64.ln() + peak)).abs() < 1e-12);
    }

    #[test]
    fn single_component_score_and_laplacian() {
        let d = 7;
        let mu = vec![2.0; d];
        let gmm = GmmSpec::single(mu.clone(), 50.0).unwrap();
        let sigma = 3.0;
        let var = 50.0 + 9.0;
        let x = vec![0.5; d];
        let eval = gmm.evaluate(sigma, &x);
        for (s, (m, xi)) in eval.score.iter().zip(mu.iter().zip(&x)) {
            assert!((s - (m - xi) / var).abs() < 1e-12);
        }
        assert!((eval.score_laplacian + d as f64 / var).abs() < 1e-12);
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let gmm = GmmSpec::sample_uniform_means(5, 8, 40.0, 50.0, 11).unwrap();
        for trial in 0..20 {
            let mut rng = stream(trial, StreamPurpose::Metric, 0, 0, 0);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-60.0..60.0)).collect();
            let pis = gmm.responsibilities(1.0, &x);
            let total: f64 = pis.iter().sum();
            assert!((total - 1.0).abs() < 1e-10);
            assert!(pis.iter().all(|p| *p >= 0.0));
        }
    }

    /// Central finite differences of the log-density as an independent check
    /// on the analytic score and Laplacian. Second differences need a larger
    /// step than first differences to stay clear of cancellation in the
    /// large negative log-densities.
    fn fd_score_and_laplacian(gmm: &GmmSpec, sigma: f64, x: &[f64]) -> (Vec<f64>, f64) {
        let eps_g = 1e-5;
        let eps_l = 5e-3;
        let d = x.len();
        let f0 = gmm.diffused_logpdf(sigma, x);
        let mut grad = vec![0.0; d];
        let mut lap = 0.0;
        let mut xp = x.to_vec();
        for a in 0..d {
            xp[a] = x[a] + eps_g;
            let fp = gmm.diffused_logpdf(sigma, &xp);
            xp[a] = x[a] - eps_g;
            let fm = gmm.diffused_logpdf(sigma, &xp);
            grad[a] = (fp - fm) / (2.0 * eps_g);
            xp[a] = x[a] + eps_l;
            let lp = gmm.diffused_logpdf(sigma, &xp);
            xp[a] = x[a] - eps_l;
            let lm = gmm.diffused_logpdf(sigma, &xp);
            xp[a] = x[a];
            lap += (lp - 2.0 * f0 + lm) / (eps_l * eps_l);
        }
        (grad, lap)
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let gmm = GmmSpec::sample_uniform_means(30, 40, 40.0, 50.0, 7).unwrap();
        for (trial, &sigma) in [0.005f64, 1.0, 50.0].iter().enumerate() {
            let mut rng = stream(100 + trial as u64, StreamPurpose::Metric, 0, 0, 0);
            let x: Vec<f64> = (0..30).map(|_| rng.gen_range(-45.0..45.0)).collect();
            let eval = gmm.evaluate(sigma, &x);
            let (fd_grad, fd_lap) = fd_score_and_laplacian(&gmm, sigma, &x);
            for (a, (g, fg)) in eval.score.iter().zip(&fd_grad).enumerate() {
                let denom = fg.abs().max(1e-8);
                assert!(
                    (g - fg).abs() / denom < 1e-4,
                    "sigma={sigma} a={a} analytic={g} fd={fg}"
                );
            }
            let denom = fd_lap.abs().max(1e-8);
            assert!(
                (eval.score_laplacian - fd_lap).abs() / denom < 1e-5,
                "sigma={sigma} lap={} fd={fd_lap}",
                eval.score_laplacian
            );
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(GmmSpec::new(2, vec![0.0, 0.0], 50.0, vec![0.7]).is_err());
        assert!(GmmSpec::new(2, vec![0.0, 0.0, 1.0, 1.0], 50.0, vec![0.7, 0.7]).is_err());
        assert!(GmmSpec::new(2, vec![0.0, 0.0], -1.0, vec![1.0]).is_err());
    }
}
