//! The weighted particle ensemble.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math::logsumexp;
use crate::rngstream::{stream, StreamPurpose};

/// `N` particles in `d` dimensions with normalized log-weights
/// (`logsumexp(log_weights) = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    log_weights: Vec<f64>,
    num_particles: usize,
    dim: usize,
    step_index: usize,
    /// Stream key components; together with the step index these determine
    /// every future draw.
    seed: u64,
    round: u64,
}

impl ParticleEnsemble {
    /// Draw `n` particles from the generic high-noise prior
    /// `N(0, sigma_max^2 I)` with uniform weights. Used when the base model
    /// offers no exact noised marginal.
    pub fn init(n: usize, dim: usize, sigma_max: f64, seed: u64, round: u64) -> Self {
        let mut positions = vec![0.0; n * dim];
        for (i, chunk) in positions.chunks_mut(dim).enumerate() {
            let mut rng = stream(seed, StreamPurpose::Init, round, 0, i as u64);
            for x in chunk.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x = sigma_max * z;
            }
        }
        Self::from_positions(positions, n, dim, seed, round)
    }

    /// Draw `n` particles exactly from the noised base marginal of an
    /// isotropic mixture: pick a component, then add `sigma_max` noise on
    /// top of the component variance.
    pub fn init_diffused_gmm(
        gmm: &crate::targets::GmmSpec,
        n: usize,
        sigma_max: f64,
        seed: u64,
        round: u64,
    ) -> Self {
        let dim = crate::targets::GmmSpec::dim(gmm);
        let std = (gmm.component_variance() + sigma_max * sigma_max).sqrt();
        let mut positions = vec![0.0; n * dim];
        for (i, chunk) in positions.chunks_mut(dim).enumerate() {
            let mut rng = stream(seed, StreamPurpose::Init, round, 0, i as u64);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut comp = gmm.num_components() - 1;
            for (c, w) in gmm.weights().iter().enumerate() {
                acc += w;
                if u < acc {
                    comp = c;
                    break;
                }
            }
            let mu = gmm.mean(comp);
            for (x, m) in chunk.iter_mut().zip(mu) {
                let z: f64 = rng.sample(StandardNormal);
                *x = m + std * z;
            }
        }
        Self::from_positions(positions, n, dim, seed, round)
    }

    fn from_positions(positions: Vec<f64>, n: usize, dim: usize, seed: u64, round: u64) -> Self {
        Self {
            positions,
            log_weights: vec![-(n as f64).ln(); n],
            num_particles: n,
            dim,
            step_index: 0,
            seed,
            round,
        }
    }

    pub fn num_particles(&self) -> usize {
        self.num_particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Linear weights, summing to one.
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    pub(crate) fn advance_step(&mut self) {
        self.step_index += 1;
    }

    /// Add per-particle increments to the log-weights and renormalize.
    pub(crate) fn update_log_weights(&mut self, increments: &[f64]) {
        for (lw, inc) in self.log_weights.iter_mut().zip(increments) {
            *lw += inc;
        }
        self.renormalize();
    }

    pub(crate) fn renormalize(&mut self) {
        let lse = logsumexp(&self.log_weights);
        for lw in self.log_weights.iter_mut() {
            *lw -= lse;
        }
    }

    pub(crate) fn kill_particle(&mut self, i: usize) {
        self.log_weights[i] = f64::NEG_INFINITY;
    }

    pub(crate) fn reset_uniform_weights(&mut self) {
        let lw = -(self.num_particles as f64).ln();
        self.log_weights.fill(lw);
    }

    /// ESS as a fraction of `N`: `1 / (N sum w_i^2)`.
    pub fn ess_fraction(&self) -> f64 {
        ess_fraction(&self.log_weights)
    }
}

/// ESS fraction of normalized log-weights.
pub fn ess_fraction(log_weights: &[f64]) -> f64 {
    let n = log_weights.len() as f64;
    let sum_sq: f64 = log_weights.iter().map(|lw| (2.0 * lw).exp()).sum();
    1.0 / (n * sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::weighted_covariance;

    #[test]
    fn init_gives_uniform_log_weights() {
        let e = ParticleEnsemble::init(4, 3, 50.0, 0, 0);
        for lw in e.log_weights() {
            assert!((lw - (-(4.0f64).ln())).abs() < 1e-15);
        }
        assert!((logsumexp(e.log_weights())).abs() < 1e-12);
    }

    #[test]
    fn init_is_bitwise_reproducible() {
        let a = ParticleEnsemble::init(64, 5, 50.0, 42, 0);
        let b = ParticleEnsemble::init(64, 5, 50.0, 42, 0);
        assert_eq!(a.positions(), b.positions());
        let c = ParticleEnsemble::init(64, 5, 50.0, 43, 0);
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn init_diffused_gmm_matches_noised_marginal() {
        // Single component at mu: the noised marginal is
        // N(mu, (v + sigma_max^2) I).
        let gmm = crate::targets::GmmSpec::single(vec![3.0, -1.0], 50.0).unwrap();
        let n = 100_000;
        let e = ParticleEnsemble::init_diffused_gmm(&gmm, n, 50.0, 11, 0);
        let var = 50.0 + 2500.0;
        let se_mean = (var / n as f64).sqrt();
        for a in 0..2 {
            let mean: f64 = (0..n).map(|i| e.position(i)[a]).sum::<f64>() / n as f64;
            let mu = gmm.mean(0)[a];
            assert!((mean - mu).abs() < 4.0 * se_mean, "a={a} mean={mean}");
            let v: f64 = (0..n)
                .map(|i| (e.position(i)[a] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            assert!((v - var).abs() / var < 0.02, "a={a} var={v}");
        }
    }

    #[test]
    fn init_moments_match_prior() {
        // Sample covariance should be sigma_max^2 I within Monte Carlo error.
        let n = 100_000;
        let dim = 2;
        let sigma_max = 50.0;
        let e = ParticleEnsemble::init(n, dim, sigma_max, 7, 0);
        let w = vec![1.0 / n as f64; n];
        let cov = weighted_covariance(&w, e.positions(), dim);
        let var = sigma_max * sigma_max;
        // SE of a variance estimate is var * sqrt(2/n).
        let se = var * (2.0 / n as f64).sqrt();
        for a in 0..dim {
            for b in 0..dim {
                let want = if a == b { var } else { 0.0 };
                let tol = if a == b { 4.0 * se } else { 4.0 * var / (n as f64).sqrt() };
                assert!(
                    (cov[a * dim + b] - want).abs() < tol,
                    "cov[{a}{b}]={} want={want}",
                    cov[a * dim + b]
                );
            }
        }
    }

    #[test]
    fn ess_fraction_examples() {
        let uniform = vec![-(4.0f64).ln(); 4];
        assert!((ess_fraction(&uniform) - 1.0).abs() < 1e-12);

        let mut one_hot = vec![f64::NEG_INFINITY; 8];
        one_hot[3] = 0.0;
        assert!((ess_fraction(&one_hot) - 1.0 / 8.0).abs() < 1e-12);

        // w = (3/4, 1/4): ESS = 1 / (2 (9/16 + 1/16)) = 0.8
        let lw = [(0.75f64).ln(), (0.25f64).ln()];
        assert!((ess_fraction(&lw) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn ess_stays_in_unit_interval() {
        use rand::Rng;
        let mut rng = stream(3, StreamPurpose::Metric, 0, 0, 0);
        for _ in 0..50 {
            let n = 16;
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-30.0..0.0)).collect();
            let lse = logsumexp(&raw);
            let lw: Vec<f64> = raw.iter().map(|v| v - lse).collect();
            let ess = ess_fraction(&lw);
            assert!(ess > 0.0 && ess <= 1.0 + 1e-12, "ess={ess}");
        }
    }
}
