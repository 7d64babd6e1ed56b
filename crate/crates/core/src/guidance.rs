//! Guided drift, reweighting potential, and control potential.
//!
//! The retargeted path `q_t proportional to p_t^gamma exp(r_t)` evolves under
//! a Fokker-Planck equation with drift
//! `v~ = ((U^2 + V^2)/2)(gamma score + grad r_t)` (the forward drift is zero
//! under the variance-exploding schedule) plus a zero-mean reweighting source.
//! The uncentered potential is
//!
//! `G = dr_t/dt + (U^2/2)(lap r_t - gamma(1-gamma)||score||^2)
//!      + grad r_t . (gamma U^2 score + (U^2/2) grad r_t)`
//!
//! and any control drift `b` can be folded into the dynamics as long as the
//! potential picks up `h(x; b) = (gamma score + grad r_t) . b + div b`, which
//! has zero mean under `q_t`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{dot, norm_sq};
use crate::schedule::StepCoeffs;
use crate::targets::RewardPack;

/// Everything the dynamics formulas need at one `(t, x)`.
#[derive(Debug, Clone, Copy)]
pub struct GuidanceContext<'a> {
    pub coeffs: StepCoeffs,
    pub gamma: f64,
    pub score: &'a [f64],
    pub score_laplacian: f64,
    /// Base log-density, when the model exposes one (ECG scalar basis).
    pub logp: Option<f64>,
    pub reward: Option<&'a RewardPack>,
}

impl<'a> GuidanceContext<'a> {
    pub fn dim(&self) -> usize {
        self.score.len()
    }

    /// Target score `gamma * score + grad r_t`, written into `out`.
    pub fn target_score(&self, out: &mut [f64]) {
        match self.reward {
            Some(pack) => {
                for (o, (s, g)) in out.iter_mut().zip(self.score.iter().zip(&pack.grad)) {
                    *o = self.gamma * s + g;
                }
            }
            None => {
                for (o, s) in out.iter_mut().zip(self.score) {
                    *o = self.gamma * s;
                }
            }
        }
    }
}

/// Guided drift `v~` written into `out`.
pub fn guided_drift(ctx: &GuidanceContext, out: &mut [f64]) {
    let u2 = ctx.coeffs.u_coeff * ctx.coeffs.u_coeff;
    let v2 = ctx.coeffs.v_coeff * ctx.coeffs.v_coeff;
    let half = 0.5 * (u2 + v2);
    ctx.target_score(out);
    for o in out.iter_mut() {
        *o *= half;
    }
}

/// Uncentered reweighting potential `G`. Centering happens in the particle
/// engine via weight normalization.
pub fn potential_g(ctx: &GuidanceContext) -> f64 {
    let u2 = ctx.coeffs.u_coeff * ctx.coeffs.u_coeff;
    let score_sq = norm_sq(ctx.score);
    let annealing = -0.5 * u2 * ctx.gamma * (1.0 - ctx.gamma) * score_sq;
    match ctx.reward {
        None => annealing,
        Some(pack) => {
            let grad_score = dot(&pack.grad, ctx.score);
            let grad_sq = norm_sq(&pack.grad);
            pack.time_derivative
                + 0.5 * u2 * pack.laplacian
                + annealing
                + ctx.gamma * u2 * grad_score
                + 0.5 * u2 * grad_sq
        }
    }
}

/// Basis functions for the control drift at one particle.
///
/// `vectors[i]` is the i-th vector basis with divergence `divergences[i]`;
/// `scalars[i]` is the matching scalar potential value (whose gradient is
/// `vectors[i]`) used by the energy-based assembly.
#[derive(Debug, Clone, Default)]
pub struct BasisEval<'a> {
    pub vectors: Vec<&'a [f64]>,
    pub divergences: Vec<f64>,
    pub scalars: Vec<f64>,
}

impl<'a> BasisEval<'a> {
    pub fn n(&self) -> usize {
        self.vectors.len()
    }
}

/// Per-basis control potentials `h_i = (gamma score + grad r_t) . s_i + div s_i`.
pub fn basis_potentials(ctx: &GuidanceContext, basis: &BasisEval) -> Vec<f64> {
    let mut target = vec![0.0; ctx.dim()];
    ctx.target_score(&mut target);
    basis
        .vectors
        .iter()
        .zip(&basis.divergences)
        .map(|(vec, div)| dot(&target, vec) + div)
        .collect()
}

/// Control potential `h(x; b)` for `b = sum_i theta_i s_i`.
pub fn control_potential_h(ctx: &GuidanceContext, basis: &BasisEval, theta: &[f64]) -> Result<f64> {
    if theta.len() != basis.n() {
        return Err(Error::DimensionMismatch {
            expected: basis.n(),
            got: theta.len(),
            context: "control coefficients",
        });
    }
    let h = basis_potentials(ctx, basis);
    Ok(dot(theta, &h))
}

/// Unbiased estimate of `lap log p = tr(grad score)` from Rademacher probes.
///
/// Each probe contributes `xi . J xi` with the Jacobian-vector product taken
/// by central finite differences of the score field along `xi`.
pub fn hutchinson_laplacian<F, R>(score_fn: F, x: &[f64], probes: usize, rng: &mut R) -> f64
where
    F: Fn(&[f64], &mut [f64]),
    R: Rng,
{
    assert!(probes >= 1, "need at least one probe");
    let d = x.len();
    let eps = 1e-4 * (1.0 + norm_sq(x).sqrt());
    let mut xi = vec![0.0; d];
    let mut plus = vec![0.0; d];
    let mut minus = vec![0.0; d];
    let mut s_plus = vec![0.0; d];
    let mut s_minus = vec![0.0; d];
    let mut acc = 0.0;
    for _ in 0..probes {
        for v in xi.iter_mut() {
            *v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        for a in 0..d {
            plus[a] = x[a] + eps * xi[a];
            minus[a] = x[a] - eps * xi[a];
        }
        score_fn(&plus, &mut s_plus);
        score_fn(&minus, &mut s_minus);
        let mut quad = 0.0;
        for a in 0..d {
            quad += (s_plus[a] - s_minus[a]) / (2.0 * eps) * xi[a];
        }
        acc += quad;
    }
    acc / probes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngstream::{stream, StreamPurpose};
    use crate::schedule::DiffusionSchedule;
    use crate::targets::{GmmSpec, QuadraticReward, RewardSchedule, TargetSpec};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ctx_at<'a>(
        sched: &DiffusionSchedule,
        gamma: f64,
        t: f64,
        score: &'a [f64],
        lap: f64,
        reward: Option<&'a RewardPack>,
    ) -> GuidanceContext<'a> {
        GuidanceContext {
            coeffs: sched.coeffs(t),
            gamma,
            score,
            score_laplacian: lap,
            logp: None,
            reward,
        }
    }

    #[test]
    fn potential_vanishes_identically_for_plain_sampling() {
        // gamma = 1 with no reward must give G = 0 exactly, not approximately.
        let sched = DiffusionSchedule::default();
        let mut rng = stream(1, StreamPurpose::Metric, 0, 0, 0);
        for _ in 0..50 {
            let score: Vec<f64> = (0..10).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let t = rng.gen_range(0.0..49.995);
            let ctx = ctx_at(&sched, 1.0, t, &score, -0.3, None);
            assert_eq!(potential_g(&ctx), 0.0);
        }
    }

    #[test]
    fn annealed_potential_reduces_to_score_norm() {
        let sched = DiffusionSchedule::default();
        let score = vec![0.5, -1.0, 2.0];
        let t = 20.0;
        let ctx = ctx_at(&sched, 2.0, t, &score, 0.0, None);
        let u2 = ctx.coeffs.u_coeff.powi(2);
        // -gamma(1-gamma) = 2 at gamma = 2.
        let want = u2 * norm_sq(&score);
        assert!((potential_g(&ctx) - want).abs() < 1e-12);
    }

    #[test]
    fn drift_scales_with_gamma_and_churn() {
        let sched = DiffusionSchedule::default();
        let score = vec![1.0, -2.0];
        let t = 10.0;
        let mut out = vec![0.0; 2];
        let ctx = ctx_at(&sched, 1.0, t, &score, 0.0, None);
        guided_drift(&ctx, &mut out);
        let u2 = ctx.coeffs.u_coeff.powi(2);
        assert!((out[0] - u2 * score[0]).abs() < 1e-12);
        let ctx2 = ctx_at(&sched, 2.0, t, &score, 0.0, None);
        let mut out2 = vec![0.0; 2];
        guided_drift(&ctx2, &mut out2);
        assert!((out2[0] - 2.0 * out[0]).abs() < 1e-12);
        assert!((out2[1] - 2.0 * out[1]).abs() < 1e-12);
    }

    #[test]
    fn affine_case_drift_matches_symbolic_coefficients() {
        // Single-Gaussian base plus quadratic reward: the drift is affine,
        // v~(x) = A (mu_terms - x) assembled symbolically here.
        let sched = DiffusionSchedule::default();
        let v = 50.0;
        let mu = 3.0;
        let center = -2.0;
        let scale = 200.0;
        let gamma = 1.0;
        let horizon = sched.horizon();
        let gmm = GmmSpec::single(vec![mu], v).unwrap();
        let reward = QuadraticReward::new(vec![center], scale).unwrap();
        let schedule = RewardSchedule::linear(horizon).unwrap();
        let target = TargetSpec::rewarded_gmm(gmm, gamma, reward, schedule).unwrap();

        let t = 12.5;
        let coeffs = sched.coeffs(t);
        let beta = t / horizon;
        for &x in &[-10.0, 0.0, 4.0, 22.0] {
            let xv = [x];
            let eval = target.gmm().unwrap().evaluate(coeffs.sigma, &xv);
            let pack = target.reward_pack(t, &xv).unwrap();
            let ctx = GuidanceContext {
                coeffs,
                gamma,
                score: &eval.score,
                score_laplacian: eval.score_laplacian,
                logp: Some(eval.logpdf),
                reward: Some(&pack),
            };
            let mut out = [0.0];
            guided_drift(&ctx, &mut out);
            // Symbolic affine form.
            let var = v + coeffs.sigma * coeffs.sigma;
            let half = 0.5 * (coeffs.u_coeff.powi(2) + coeffs.v_coeff.powi(2));
            let want = half * (gamma * (mu - x) / var + beta * (center - x) / scale);
            assert!((out[0] - want).abs() < 1e-10, "x={x} got={} want={want}", out[0]);
        }
    }

    #[test]
    fn control_potential_is_linear_in_theta() {
        let sched = DiffusionSchedule::default();
        let mut rng = stream(2, StreamPurpose::Metric, 0, 0, 0);
        let d = 6;
        for _ in 0..20 {
            let score: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b1: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b2: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let ctx = ctx_at(&sched, 2.0, 5.0, &score, -0.7, None);
            let basis = BasisEval {
                vectors: vec![&b1, &b2],
                divergences: vec![0.4, -1.1],
                scalars: vec![0.0, 0.0],
            };
            let t1 = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let t2 = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let sum = [t1[0] + t2[0], t1[1] + t2[1]];
            let h1 = control_potential_h(&ctx, &basis, &t1).unwrap();
            let h2 = control_potential_h(&ctx, &basis, &t2).unwrap();
            let hs = control_potential_h(&ctx, &basis, &sum).unwrap();
            assert!((hs - (h1 + h2)).abs() < 1e-10);
            let alpha = 1.75;
            let scaled = [alpha * t1[0], alpha * t1[1]];
            let ha = control_potential_h(&ctx, &basis, &scaled).unwrap();
            assert!((ha - alpha * h1).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_theta_and_constant_basis() {
        let sched = DiffusionSchedule::default();
        let score = vec![1.0, -0.5, 0.25];
        let ctx = ctx_at(&sched, 2.0, 7.0, &score, 0.0, None);
        let c = vec![0.3, 0.3, 0.3];
        let basis = BasisEval {
            vectors: vec![&c],
            divergences: vec![0.0],
            scalars: vec![0.0],
        };
        assert_eq!(control_potential_h(&ctx, &basis, &[0.0]).unwrap(), 0.0);
        // Constant vector basis: h = (gamma score) . c since div c = 0.
        let mut target = vec![0.0; 3];
        ctx.target_score(&mut target);
        let want = dot(&target, &c);
        assert!((control_potential_h(&ctx, &basis, &[1.0]).unwrap() - want).abs() < 1e-12);
        // Wrong theta length is an error.
        assert!(control_potential_h(&ctx, &basis, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn control_potential_has_zero_mean_under_tractable_target() {
        // For a gamma-annealed single Gaussian the path marginal is
        // N(mu, (v + sigma^2)/gamma I); sample it exactly and check the
        // weighted mean of h with the score basis is within 3 standard errors
        // of zero.
        let sched = DiffusionSchedule::default();
        let gamma = 2.0;
        let v = 50.0;
        let mu = 1.5;
        let d = 4;
        let gmm = GmmSpec::single(vec![mu; d], v).unwrap();
        let t = 30.0;
        let coeffs = sched.coeffs(t);
        let var_q = (v + coeffs.sigma * coeffs.sigma) / gamma;
        let n = 200_000;
        let mut rng = stream(5, StreamPurpose::Metric, 0, 0, 0);
        let mut values = Vec::with_capacity(n);
        let mut x = vec![0.0; d];
        for _ in 0..n {
            for xi in x.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *xi = mu + var_q.sqrt() * z;
            }
            let eval = gmm.evaluate(coeffs.sigma, &x);
            let ctx = GuidanceContext {
                coeffs,
                gamma,
                score: &eval.score,
                score_laplacian: eval.score_laplacian,
                logp: Some(eval.logpdf),
                reward: None,
            };
            let basis = BasisEval {
                vectors: vec![&eval.score],
                divergences: vec![eval.score_laplacian],
                scalars: vec![eval.logpdf],
            };
            values.push(control_potential_h(&ctx, &basis, &[1.0]).unwrap());
        }
        let mean: f64 = values.iter().sum::<f64>() / n as f64;
        let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean={mean} se={se}");
    }

    /// Finite-difference assembly of the uncentered potential from the
    /// closed-form unnormalized log-density of the path, fully independent
    /// of the algebra in `potential_g`.
    fn pde_residual_oracle(
        sched: &DiffusionSchedule,
        target: &TargetSpec,
        t: f64,
        x: f64,
    ) -> f64 {
        let horizon = sched.horizon();
        let gmm = target.gmm().unwrap();
        let log_qt = |tt: f64, xx: f64| -> f64 {
            let sigma = sched.noise_level(tt);
            let beta = tt / horizon;
            let r = target.reward.as_ref().map(|r| r.value(&[xx])).unwrap_or(0.0);
            target.gamma * gmm.diffused_logpdf(sigma, &[xx]) + beta * r
        };
        let drift = |tt: f64, xx: f64| -> f64 {
            let coeffs = sched.coeffs(tt);
            let eval = gmm.evaluate(coeffs.sigma, &[xx]);
            let pack = target.reward_pack(tt, &[xx]).ok();
            let ctx = GuidanceContext {
                coeffs,
                gamma: target.gamma,
                score: &eval.score,
                score_laplacian: eval.score_laplacian,
                logp: Some(eval.logpdf),
                reward: pack.as_ref(),
            };
            let mut out = [0.0];
            guided_drift(&ctx, &mut out);
            out[0]
        };
        // log q~ is exactly quadratic in x here, so the spatial differences
        // are exact; dx only needs to stay clear of cancellation.
        let dt = 1e-5;
        let dx = 1e-3;
        let coeffs = sched.coeffs(t);
        let dlogq_dt = (log_qt(t + dt, x) - log_qt(t - dt, x)) / (2.0 * dt);
        let f0 = log_qt(t, x);
        let fp = log_qt(t, x + dx);
        let fm = log_qt(t, x - dx);
        let grad = (fp - fm) / (2.0 * dx);
        let lap = (fp - 2.0 * f0 + fm) / (dx * dx);
        let div_v = (drift(t, x + dx) - drift(t, x - dx)) / (2.0 * dx);
        let v = drift(t, x);
        // G = d(log q~)/dt + div v + v . grad log q~
        //     - (V^2/2)(lap log q~ + ||grad log q~||^2).
        dlogq_dt + div_v + v * grad
            - 0.5 * coeffs.v_coeff * coeffs.v_coeff * (lap + grad * grad)
    }

    #[test]
    fn potential_matches_pde_residual_oracle() {
        let sched = DiffusionSchedule::default();
        let horizon = sched.horizon();
        let gmm = GmmSpec::single(vec![2.0], 50.0).unwrap();
        let reward = QuadraticReward::new(vec![-1.0], 150.0).unwrap();
        let schedule = RewardSchedule::linear(horizon).unwrap();
        let target = TargetSpec::rewarded_gmm(gmm, 2.0, reward, schedule).unwrap();
        for &t in &[5.0, 20.0, 40.0] {
            for &x in &[-4.0, 0.0, 3.0, 8.0] {
                let coeffs = sched.coeffs(t);
                let eval = target.gmm().unwrap().evaluate(coeffs.sigma, &[x]);
                let pack = target.reward_pack(t, &[x]).unwrap();
                let ctx = GuidanceContext {
                    coeffs,
                    gamma: target.gamma,
                    score: &eval.score,
                    score_laplacian: eval.score_laplacian,
                    logp: Some(eval.logpdf),
                    reward: Some(&pack),
                };
                let got = potential_g(&ctx);
                let want = pde_residual_oracle(&sched, &target, t, x);
                let denom = want.abs().max(1e-3);
                assert!(
                    (got - want).abs() / denom < 1e-4,
                    "t={t} x={x} got={got} oracle={want}"
                );
            }
        }
    }

    #[test]
    fn fokker_planck_identity_holds_pointwise() {
        // Normalized 1-D check of the full identity
        // dq/dt = -d/dx(v~ q) + (V^2/2) d2q/dx2 + q g with g = G - E_q[G],
        // on a grid, for a gamma-annealed single Gaussian where
        // q_t = N(mu, (v + sigma_t^2)/gamma) in closed form.
        let sched = DiffusionSchedule::default();
        let gamma = 2.0;
        let v = 50.0;
        let mu = 1.0;
        let gmm = GmmSpec::single(vec![mu], v).unwrap();
        let target = TargetSpec::annealed_gmm(gmm, gamma).unwrap();
        let q = |tt: f64, xx: f64| -> f64 {
            let sigma = sched.noise_level(tt);
            let var = (v + sigma * sigma) / gamma;
            (-0.5 * (xx - mu) * (xx - mu) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let t = 25.0;
        let coeffs = sched.coeffs(t);
        let var_q = (v + coeffs.sigma * coeffs.sigma) / gamma;
        // E_q[G] by quadrature on a wide grid.
        let mut mean_g = 0.0;
        let mut mass = 0.0;
        let half_width = 8.0 * var_q.sqrt();
        let m = 4001;
        let step = 2.0 * half_width / (m - 1) as f64;
        let eval_g = |xx: f64| -> f64 {
            let eval = target.gmm().unwrap().evaluate(coeffs.sigma, &[xx]);
            let ctx = GuidanceContext {
                coeffs,
                gamma,
                score: &eval.score,
                score_laplacian: eval.score_laplacian,
                logp: Some(eval.logpdf),
                reward: None,
            };
            potential_g(&ctx)
        };
        for i in 0..m {
            let xx = mu - half_width + i as f64 * step;
            let w = q(t, xx) * step;
            mean_g += w * eval_g(xx);
            mass += w;
        }
        mean_g /= mass;

        let drift = |xx: f64| -> f64 {
            let eval = target.gmm().unwrap().evaluate(coeffs.sigma, &[xx]);
            let ctx = GuidanceContext {
                coeffs,
                gamma,
                score: &eval.score,
                score_laplacian: eval.score_laplacian,
                logp: Some(eval.logpdf),
                reward: None,
            };
            let mut out = [0.0];
            guided_drift(&ctx, &mut out);
            out[0]
        };
        let dt = 1e-4;
        let dx = 1e-3;
        for &xx in &[mu - 5.0, mu - 1.0, mu, mu + 2.0, mu + 6.0] {
            let dq_dt = (q(t + dt, xx) - q(t - dt, xx)) / (2.0 * dt);
            let flux_p = drift(xx + dx) * q(t, xx + dx);
            let flux_m = drift(xx - dx) * q(t, xx - dx);
            let div_flux = (flux_p - flux_m) / (2.0 * dx);
            let lap_q = (q(t, xx + dx) - 2.0 * q(t, xx) + q(t, xx - dx)) / (dx * dx);
            let g = eval_g(xx) - mean_g;
            let rhs = -div_flux + 0.5 * coeffs.v_coeff * coeffs.v_coeff * lap_q + q(t, xx) * g;
            let scale = dq_dt.abs().max(1e-6);
            assert!(
                (dq_dt - rhs).abs() / scale < 1e-3,
                "x={xx} lhs={dq_dt} rhs={rhs}"
            );
        }
    }

    #[test]
    fn hutchinson_exact_for_linear_score_field() {
        let d = 12;
        let c = 4.0;
        let field = |x: &[f64], out: &mut [f64]| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = -xi / c;
            }
        };
        let mut rng = stream(9, StreamPurpose::Probe, 0, 0, 0);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        for probes in [1, 4] {
            let est = hutchinson_laplacian(field, &x, probes, &mut rng);
            assert!((est + d as f64 / c).abs() < 1e-6, "probes={probes} est={est}");
        }
    }

    #[test]
    fn hutchinson_matches_analytic_gmm_laplacian() {
        let gmm = GmmSpec::sample_uniform_means(10, 6, 10.0, 50.0, 21).unwrap();
        let sigma = 2.0;
        let mut rng = stream(10, StreamPurpose::Probe, 0, 0, 0);
        let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-12.0..12.0)).collect();
        let analytic = gmm.diffused_score_laplacian(sigma, &x);
        let field = |p: &[f64], out: &mut [f64]| gmm.diffused_score(sigma, p, out);

        // 256-probe estimate within 3 standard errors of the analytic value.
        let samples: Vec<f64> = (0..256)
            .map(|_| hutchinson_laplacian(field, &x, 1, &mut rng))
            .collect();
        let mean: f64 = samples.iter().sum::<f64>() / samples.len() as f64;
        let var: f64 =
            samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / samples.len() as f64;
        let se = (var / samples.len() as f64).sqrt().max(1e-12);
        assert!(
            (mean - analytic).abs() <= 3.0 * se,
            "mean={mean} analytic={analytic} se={se}"
        );
    }

    #[test]
    fn hutchinson_single_probe_is_unbiased() {
        let gmm = GmmSpec::sample_uniform_means(6, 4, 8.0, 50.0, 33).unwrap();
        let sigma = 1.0;
        let mut rng = stream(11, StreamPurpose::Probe, 0, 0, 0);
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let analytic = gmm.diffused_score_laplacian(sigma, &x);
        let field = |p: &[f64], out: &mut [f64]| gmm.diffused_score(sigma, p, out);
        let reps = 10_000;
        let samples: Vec<f64> = (0..reps)
            .map(|_| hutchinson_laplacian(field, &x, 1, &mut rng))
            .collect();
        let mean: f64 = samples.iter().sum::<f64>() / reps as f64;
        let var: f64 = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / reps as f64;
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - analytic).abs() <= 3.0 * se,
            "mean={mean} analytic={analytic} se={se}"
        );
    }
}
