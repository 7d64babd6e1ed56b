//! Weighted-particle engine.
//!
//! One step follows the solve / reweight / move / resample order: evaluate
//! the per-particle context at the current time, assemble and solve the
//! control system from the pre-move weighted ensemble, update log-weights
//! with the residual potential, move particles by Euler-Maruyama on the
//! nonuniform grid, then resample when the ESS trigger or the periodic
//! trigger fires.
//!
//! Refinement repeats full passes with the per-step control carried over:
//! because the bases are fixed functions per step, the accumulated control is
//! the basis combination with the summed coefficients.

mod config;
mod ensemble;
mod resample;
mod trace;

pub use config::{EngineConfig, ExtraScalarBasis, LaplacianMode, Method};
pub use ensemble::{ess_fraction, ParticleEnsemble};
pub use resample::{apply_parents, systematic_parents};
pub use trace::{RunTrace, StepRecord};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::control::{assemble_ecg, assemble_vcg, solve_regularized, ControlMode, ControlState};
use crate::error::{Error, Result};
use crate::guidance::hutchinson_laplacian;
use crate::math::{dot, norm_sq, weighted_variance};
use crate::rngstream::{stream, StreamPurpose};
use crate::schedule::{DiffusionSchedule, StepCoeffs, TimeGrid};
use crate::targets::TargetSpec;

/// Which control bases are active for a run. The reward basis is dismissed
/// on pure-annealing targets; the forward-drift basis is identically zero
/// under the variance-exploding schedule and never materializes.
#[derive(Debug, Clone, Copy)]
struct BasisPlan {
    mode: Option<ControlMode>,
    use_reward: bool,
    extra: ExtraScalarBasis,
    needs_logp: bool,
    n: usize,
}

impl BasisPlan {
    /// Index of the score basis (after the optional reward basis).
    fn score_slot(&self) -> usize {
        usize::from(self.use_reward)
    }

    fn extra_slot(&self) -> Option<usize> {
        (self.extra != ExtraScalarBasis::None).then_some(self.score_slot() + 1)
    }
}

/// Per-step evaluation buffers, structure-of-arrays over particles.
struct StepEval {
    /// Guided drift, `N x d`.
    drift: Vec<f64>,
    /// Uncentered base potential `G`, length `N`.
    g: Vec<f64>,
    /// Basis vector fields, `N x n x d` (particle-major).
    basis_vec: Vec<f64>,
    /// Basis divergences, `N x n`.
    basis_div: Vec<f64>,
    /// Basis scalar values (energy route), `N x n`.
    basis_scalar: Vec<f64>,
    /// Per-basis control potentials `h_i`, `N x n`.
    h: Vec<f64>,
}

pub struct SmcEngine<'a> {
    sched: &'a DiffusionSchedule,
    grid: &'a TimeGrid,
    target: &'a TargetSpec,
    config: &'a EngineConfig,
    plan: BasisPlan,
}

impl<'a> SmcEngine<'a> {
    pub fn new(
        sched: &'a DiffusionSchedule,
        grid: &'a TimeGrid,
        target: &'a TargetSpec,
        config: &'a EngineConfig,
    ) -> Result<Self> {
        sched.validate()?;
        config.validate()?;
        if let Some(schedule) = &target.reward_schedule {
            if (schedule.horizon - sched.horizon()).abs() > 1e-9 * sched.horizon() {
                return Err(Error::InvalidSpec(format!(
                    "reward schedule horizon {} does not match grid horizon {}",
                    schedule.horizon,
                    sched.horizon()
                )));
            }
        }
        let mode = config.method.control_mode();
        let use_reward = target.has_reward();
        let extra = if mode == Some(ControlMode::Ecg) {
            config.extra_scalar_basis
        } else {
            ExtraScalarBasis::None
        };
        let n = if mode.is_some() {
            usize::from(use_reward) + 1 + usize::from(extra != ExtraScalarBasis::None)
        } else {
            0
        };
        let needs_logp = mode == Some(ControlMode::Ecg);
        if needs_logp
            && extra == ExtraScalarBasis::None
            && target
                .base()
                .log_density(sched.sigma_max, &vec![0.0; target.dim()])
                .is_none()
        {
            return Err(Error::InvalidSpec(
                "energy-controlled methods need a base log-density or an extra scalar basis".into(),
            ));
        }
        Ok(Self {
            sched,
            grid,
            target,
            config,
            plan: BasisPlan {
                mode,
                use_reward,
                extra,
                needs_logp,
                n,
            },
        })
    }

    pub fn num_bases(&self) -> usize {
        self.plan.n
    }

    pub fn fresh_control_state(&self) -> ControlState {
        ControlState::zeros(self.grid.num_steps(), self.plan.n)
    }

    /// Particles start from the noised base marginal: exactly, when the base
    /// is an analytic mixture, otherwise from the Gaussian high-noise prior.
    /// The distinction matters: an unweighted start from the wrong marginal
    /// leaves a mode-mass bias no within-mode control can repair.
    pub fn init_ensemble(&self, round: u64) -> ParticleEnsemble {
        match self.target.gmm() {
            Some(gmm) => ParticleEnsemble::init_diffused_gmm(
                gmm,
                self.config.num_particles,
                self.sched.sigma_max,
                self.config.seed,
                round,
            ),
            None => ParticleEnsemble::init(
                self.config.num_particles,
                self.target.dim(),
                self.sched.sigma_max,
                self.config.seed,
                round,
            ),
        }
    }

    /// Single pass over the whole grid starting from a fresh control state.
    pub fn run(&self) -> Result<(ParticleEnsemble, RunTrace)> {
        let mut control = self.fresh_control_state();
        self.run_with_control(0, &mut control)
    }

    /// Single pass with an existing per-step control state, which is updated
    /// in place with this pass's newly solved coefficients. Used both by
    /// [`Self::refine`] and by warm restarts from a dumped coefficient
    /// history.
    pub fn run_with_control(
        &self,
        round: u64,
        control: &mut ControlState,
    ) -> Result<(ParticleEnsemble, RunTrace)> {
        let start = std::time::Instant::now();
        let mut ensemble = self.init_ensemble(round);
        let mut trace = RunTrace::default();
        for _ in 0..self.grid.num_steps() {
            let record = self.step(&mut ensemble, control, &mut trace)?;
            trace.records.push(record);
        }
        trace.wall_time_secs = start.elapsed().as_secs_f64();
        Ok((ensemble, trace))
    }

    /// Iterative refinement: repeat the full pass `rounds` times, carrying
    /// the accumulated control forward and re-initializing particles each
    /// round. Returns the last round's ensemble and every round's trace.
    pub fn refine(&self, rounds: usize) -> Result<(ParticleEnsemble, Vec<RunTrace>)> {
        if self.plan.mode.is_none() {
            return Err(Error::InvalidSpec(
                "refinement requires a controlled method".into(),
            ));
        }
        if rounds == 0 {
            return Err(Error::InvalidSpec("refinement needs at least one round".into()));
        }
        let mut control = self.fresh_control_state();
        let mut traces = Vec::with_capacity(rounds);
        let mut last = None;
        for round in 0..rounds {
            let (ensemble, trace) = self.run_with_control(round as u64, &mut control)?;
            traces.push(trace);
            last = Some(ensemble);
        }
        Ok((last.unwrap(), traces))
    }

    /// Advance the ensemble by one step, updating the control state and
    /// appending resampling bookkeeping to `trace`.
    pub fn step(
        &self,
        ensemble: &mut ParticleEnsemble,
        control: &mut ControlState,
        trace: &mut RunTrace,
    ) -> Result<StepRecord> {
        let k = ensemble.step_index();
        if k >= self.grid.num_steps() {
            return Err(Error::InvalidSpec(format!(
                "step index {k} beyond grid with {} steps",
                self.grid.num_steps()
            )));
        }
        let t = self.grid.time(k);
        let dt = self.grid.dt(k);
        let coeffs = self.sched.coeffs(t);
        let round = ensemble.round();

        // Random-projection direction: fixed per step across rounds so the
        // basis stays a fixed function and cumulative control remains valid.
        let projection = (self.plan.extra == ExtraScalarBasis::RandomProjection).then(|| {
            let mut rng = stream(self.config.seed, StreamPurpose::Probe, 0, k as u64, u64::MAX);
            let mut xi = vec![0.0; self.target.dim()];
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = norm_sq(&xi).sqrt().max(1e-12);
            xi.iter_mut().for_each(|v| *v /= norm);
            xi
        });

        let eval = self.eval_pass(ensemble, coeffs, t, round, k, projection.as_deref())?;

        let weights = ensemble.weights();
        let n = self.plan.n;
        let np = ensemble.num_particles();

        // Effective base potential: G plus the accumulated control potential.
        let theta_cum = control.cumulative(k).to_vec();
        let mut g_eff = eval.g.clone();
        if theta_cum.iter().any(|v| *v != 0.0) {
            for (p, g) in g_eff.iter_mut().enumerate() {
                *g += dot(&theta_cum, &eval.h[p * n..(p + 1) * n]);
            }
        }

        // Solve for this pass's additional control from the pre-move ensemble.
        let theta_new = if let Some(mode) = self.plan.mode {
            if self.config.force_zero_control {
                vec![0.0; n]
            } else {
                let (theta, fell_back) = self.solve_control(mode, &weights, &g_eff, &eval, np)?;
                if fell_back {
                    trace.solver_fallbacks.push(k);
                }
                theta
            }
        } else {
            Vec::new()
        };

        // Residual potential driving this step's weight update.
        let mut phi = g_eff;
        let var_g = weighted_variance(&weights, &phi);
        if theta_new.iter().any(|v| *v != 0.0) {
            for (p, f) in phi.iter_mut().enumerate() {
                *f += dot(&theta_new, &eval.h[p * n..(p + 1) * n]);
            }
        }
        if self.config.method.weighted() {
            if let Some(p) = phi.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    step: k,
                    context: format!("residual potential at particle {p}"),
                });
            }
        }
        let var_phi = weighted_variance(&weights, &phi);

        // Reweight before the move (solve, reweight, move ordering). The
        // all-zero guard keeps zero-potential paths bitwise identical to
        // methods that never touch the weights.
        if self.config.method.weighted() && phi.iter().any(|v| *v != 0.0) {
            let increments: Vec<f64> = phi.iter().map(|p| p * dt).collect();
            ensemble.update_log_weights(&increments);
        }

        let mut theta_total = theta_cum;
        for (acc, t_new) in theta_total.iter_mut().zip(&theta_new) {
            *acc += t_new;
        }
        if !theta_new.is_empty() {
            control.add(k, &theta_new);
        }

        let neutralized = self.move_pass(ensemble, &eval, &theta_total, coeffs, dt, round, k)?;
        if neutralized > 0 {
            trace.neutralized.push((k, neutralized));
            if self.config.method.weighted() {
                ensemble.renormalize();
            }
        }

        let ess = ensemble.ess_fraction();

        let mut resampled = false;
        if self.config.method.resampling() {
            let ess_hit = self.config.ess_threshold.map(|tau| ess < tau).unwrap_or(false);
            let period_hit = self
                .config
                .resample_period
                .map(|p| (k + 1) % p == 0)
                .unwrap_or(false);
            if ess_hit || period_hit {
                let mut rng = stream(self.config.seed, StreamPurpose::Resample, round, k as u64, 0);
                let u = rng.gen_range(0.0..1.0 / np as f64);
                let parents = systematic_parents(&ensemble.weights(), u);
                apply_parents(ensemble, &parents);
                trace.resample_parents.push((k, parents));
                resampled = true;
            }
        }

        ensemble.advance_step();
        Ok(StepRecord {
            step: k,
            t,
            sigma: coeffs.sigma,
            ess,
            var_phi,
            var_g,
            theta: theta_new,
            resampled,
        })
    }

    fn solve_control(
        &self,
        mode: ControlMode,
        weights: &[f64],
        g_eff: &[f64],
        eval: &StepEval,
        np: usize,
    ) -> Result<(Vec<f64>, bool)> {
        let n = self.plan.n;
        let dim = self.target.dim();
        // Transpose the particle-major buffers into basis-major columns.
        let mut h_cols = vec![vec![0.0; np]; n];
        for p in 0..np {
            for i in 0..n {
                h_cols[i][p] = eval.h[p * n + i];
            }
        }
        let mut sys = match mode {
            ControlMode::Vcg => assemble_vcg(weights, g_eff, &h_cols, self.config.ridge)?,
            ControlMode::Ecg => {
                let mut s_cols = vec![vec![0.0; np]; n];
                let mut grad_cols = vec![vec![0.0; np * dim]; n];
                for p in 0..np {
                    for i in 0..n {
                        s_cols[i][p] = eval.basis_scalar[p * n + i];
                        let src = &eval.basis_vec[(p * n + i) * dim..(p * n + i + 1) * dim];
                        grad_cols[i][p * dim..(p + 1) * dim].copy_from_slice(src);
                    }
                }
                assemble_ecg(weights, g_eff, &s_cols, &grad_cols, dim, self.config.ridge)?
            }
        };
        let theta = solve_regularized(&mut sys).to_vec();
        Ok((theta, sys.fell_back))
    }

    /// Parallel evaluation of drift, potential, and bases at the pre-move
    /// ensemble.
    fn eval_pass(
        &self,
        ensemble: &ParticleEnsemble,
        coeffs: StepCoeffs,
        t: f64,
        round: u64,
        k: usize,
        projection: Option<&[f64]>,
    ) -> Result<StepEval> {
        let np = ensemble.num_particles();
        let dim = self.target.dim();
        let n = self.plan.n;
        let plan = self.plan;
        let gamma = self.target.gamma;
        let target = self.target;
        let config = self.config;
        let half_drift = 0.5 * (coeffs.u_coeff * coeffs.u_coeff + coeffs.v_coeff * coeffs.v_coeff);
        let u2 = coeffs.u_coeff * coeffs.u_coeff;
        let (beta, beta_dot) = match &target.reward_schedule {
            Some(s) => (s.beta(t), s.beta_dot(t)),
            None => (0.0, 0.0),
        };

        // Basis buffers keep a one-slot floor so the parallel zip below has
        // nonzero chunk sizes even for uncontrolled methods.
        let ns = n.max(1);
        let mut out = StepEval {
            drift: vec![0.0; np * dim],
            g: vec![0.0; np],
            basis_vec: vec![0.0; np * ns * dim],
            basis_div: vec![0.0; np * ns],
            basis_scalar: vec![0.0; np * ns],
            h: vec![0.0; np * ns],
        };

        const BLOCK: usize = 64;
        let positions = ensemble.positions();
        out.drift
            .par_chunks_mut(BLOCK * dim)
            .zip(out.g.par_chunks_mut(BLOCK))
            .zip(out.basis_vec.par_chunks_mut(BLOCK * ns * dim))
            .zip(out.basis_div.par_chunks_mut(BLOCK * ns))
            .zip(out.basis_scalar.par_chunks_mut(BLOCK * ns))
            .zip(out.h.par_chunks_mut(BLOCK * ns))
            .enumerate()
            .for_each(
                |(block, (((((drift_b, g_b), bvec_b), bdiv_b), bscal_b), h_b))| {
                    let mut score = vec![0.0; dim];
                    let mut reward_grad = vec![0.0; dim];
                    let mut target_score = vec![0.0; dim];
                    let mut fd_grad = vec![0.0; dim];
                    let base = block * BLOCK;
                    for off in 0..g_b.len() {
                        let p = base + off;
                        let x = &positions[p * dim..(p + 1) * dim];

                        let (logp, lap_analytic) = if let Some(gmm) = target.gmm() {
                            let (logp, lap) = gmm.evaluate_into(coeffs.sigma, x, &mut score);
                            (Some(logp), Some(lap))
                        } else {
                            target.base().score(coeffs.sigma, x, &mut score);
                            let logp = plan
                                .needs_logp
                                .then(|| target.base().log_density(coeffs.sigma, x))
                                .flatten();
                            (logp, None)
                        };
                        let lap = if plan.mode.is_some() {
                            let analytic = match config.laplacian {
                                LaplacianMode::Analytic => lap_analytic
                                    .or_else(|| target.base().score_laplacian(coeffs.sigma, x)),
                                LaplacianMode::Hutchinson => None,
                            };
                            analytic.unwrap_or_else(|| {
                                let mut rng = stream(
                                    config.seed,
                                    StreamPurpose::Probe,
                                    round,
                                    k as u64,
                                    p as u64,
                                );
                                hutchinson_laplacian(
                                    |q, o| target.base().score(coeffs.sigma, q, o),
                                    x,
                                    config.hutchinson_probes,
                                    &mut rng,
                                )
                            })
                        } else {
                            0.0
                        };

                        let (r_val, r_lap, r_dot) = if let Some(reward) = &target.reward {
                            let raw = reward.value(x);
                            reward.grad(x, &mut reward_grad);
                            for gr in reward_grad.iter_mut() {
                                *gr *= beta;
                            }
                            (beta * raw, beta * reward.laplacian(), beta_dot * raw)
                        } else {
                            (0.0, 0.0, 0.0)
                        };

                        for (ts, s) in target_score.iter_mut().zip(&score) {
                            *ts = gamma * s;
                        }
                        if target.reward.is_some() {
                            for (ts, gr) in target_score.iter_mut().zip(&reward_grad) {
                                *ts += gr;
                            }
                        }
                        for (d, ts) in drift_b[off * dim..(off + 1) * dim]
                            .iter_mut()
                            .zip(&target_score)
                        {
                            *d = half_drift * ts;
                        }

                        let score_sq = norm_sq(&score);
                        let mut g_val = -0.5 * u2 * gamma * (1.0 - gamma) * score_sq;
                        if target.reward.is_some() {
                            g_val += r_dot
                                + 0.5 * u2 * r_lap
                                + gamma * u2 * dot(&reward_grad, &score)
                                + 0.5 * u2 * norm_sq(&reward_grad);
                        }
                        g_b[off] = g_val;

                        if plan.mode.is_some() {
                            let mut slot = 0;
                            if plan.use_reward {
                                write_basis(
                                    bvec_b,
                                    bdiv_b,
                                    bscal_b,
                                    h_b,
                                    off,
                                    n,
                                    dim,
                                    slot,
                                    &reward_grad,
                                    r_lap,
                                    r_val,
                                    &target_score,
                                );
                                slot += 1;
                            }
                            write_basis(
                                bvec_b,
                                bdiv_b,
                                bscal_b,
                                h_b,
                                off,
                                n,
                                dim,
                                slot,
                                &score,
                                lap,
                                logp.unwrap_or(0.0),
                                &target_score,
                            );
                            slot += 1;
                            if let Some(extra_slot) = plan.extra_slot() {
                                debug_assert_eq!(extra_slot, slot);
                                let (value, lap_fd) = extra_scalar_basis(
                                    target,
                                    coeffs.sigma,
                                    x,
                                    plan.extra,
                                    projection,
                                    &mut fd_grad,
                                    &mut score,
                                );
                                write_basis(
                                    bvec_b,
                                    bdiv_b,
                                    bscal_b,
                                    h_b,
                                    off,
                                    n,
                                    dim,
                                    slot,
                                    &fd_grad,
                                    lap_fd,
                                    value,
                                    &target_score,
                                );
                            }
                        }
                    }
                },
            );
        Ok(out)
    }

    /// Parallel Euler-Maruyama move with the combined drift. Returns how
    /// many particles were neutralized after going non-finite.
    fn move_pass(
        &self,
        ensemble: &mut ParticleEnsemble,
        eval: &StepEval,
        theta_total: &[f64],
        coeffs: StepCoeffs,
        dt: f64,
        round: u64,
        k: usize,
    ) -> Result<usize> {
        let dim = self.target.dim();
        let n = self.plan.n;
        let np = ensemble.num_particles();
        let noise_scale = coeffs.v_coeff * dt.sqrt();
        let seed = self.config.seed;
        let apply_control = theta_total.iter().any(|v| *v != 0.0);

        const BLOCK: usize = 64;
        let bad: Vec<usize> = {
            let positions = ensemble.positions_mut();
            positions
                .par_chunks_mut(BLOCK * dim)
                .enumerate()
                .map(|(block, pos_b)| {
                    let mut bad_local = Vec::new();
                    let mut old = vec![0.0; dim];
                    let base = block * BLOCK;
                    let count = pos_b.len() / dim;
                    for off in 0..count {
                        let p = base + off;
                        let x = &mut pos_b[off * dim..(off + 1) * dim];
                        old.copy_from_slice(x);
                        let drift = &eval.drift[p * dim..(p + 1) * dim];
                        let mut rng = stream(seed, StreamPurpose::Move, round, k as u64, p as u64);
                        let mut finite = true;
                        for (a, xi) in x.iter_mut().enumerate() {
                            let mut d = drift[a];
                            if apply_control {
                                for (i, th) in theta_total.iter().enumerate() {
                                    d += th * eval.basis_vec[(p * n + i) * dim + a];
                                }
                            }
                            let z: f64 = rng.sample(StandardNormal);
                            *xi += d * dt + noise_scale * z;
                            finite &= xi.is_finite();
                        }
                        if !finite {
                            x.copy_from_slice(&old);
                            bad_local.push(p);
                        }
                    }
                    bad_local
                })
                .reduce(Vec::new, |mut a, mut b| {
                    a.append(&mut b);
                    a
                })
        };

        let fraction = bad.len() as f64 / np as f64;
        if fraction > 0.01 {
            return Err(Error::Diverged { step: k, fraction });
        }
        // Stragglers keep their reverted (finite) position; weighted methods
        // drop their mass so they disappear at the next resampling.
        if self.config.method.weighted() {
            for &p in &bad {
                ensemble.kill_particle(p);
            }
        }
        Ok(bad.len())
    }
}

#[allow(clippy::too_many_arguments)]
fn write_basis(
    bvec: &mut [f64],
    bdiv: &mut [f64],
    bscal: &mut [f64],
    h: &mut [f64],
    off: usize,
    n: usize,
    dim: usize,
    slot: usize,
    vector: &[f64],
    divergence: f64,
    scalar: f64,
    target_score: &[f64],
) {
    bvec[(off * n + slot) * dim..(off * n + slot + 1) * dim].copy_from_slice(vector);
    bdiv[off * n + slot] = divergence;
    bscal[off * n + slot] = scalar;
    h[off * n + slot] = dot(target_score, vector) + divergence;
}

/// Finite-difference evaluation of the optional extra scalar basis: value,
/// gradient (into `grad_out`), and Laplacian of either the squared score
/// norm or a fixed random projection of the score.
fn extra_scalar_basis(
    target: &TargetSpec,
    sigma: f64,
    x: &[f64],
    kind: ExtraScalarBasis,
    projection: Option<&[f64]>,
    grad_out: &mut [f64],
    score_buf: &mut [f64],
) -> (f64, f64) {
    let dim = x.len();
    let scalar = |q: &[f64], buf: &mut [f64]| -> f64 {
        target.base().score(sigma, q, buf);
        match kind {
            ExtraScalarBasis::ScoreNorm => norm_sq(buf),
            ExtraScalarBasis::RandomProjection => dot(buf, projection.expect("projection set")),
            ExtraScalarBasis::None => unreachable!("extra basis evaluated without a kind"),
        }
    };
    let eps = 1e-3 * (1.0 + norm_sq(x).sqrt());
    let mut xp = x.to_vec();
    let f0 = scalar(x, score_buf);
    let mut lap = 0.0;
    for a in 0..dim {
        xp[a] = x[a] + eps;
        let fp = scalar(&xp, score_buf);
        xp[a] = x[a] - eps;
        let fm = scalar(&xp, score_buf);
        xp[a] = x[a];
        grad_out[a] = (fp - fm) / (2.0 * eps);
        lap += (fp - 2.0 * f0 + fm) / (eps * eps);
    }
    (f0, lap)
}
