//! Base distributions, rewards, and the retargeted path.
//!
//! A task retargets a diffusion base model `p` toward
//! `q_T proportional to p^gamma exp(r)`. Along backward time the path is
//! `q_t proportional to p_t^gamma exp(beta_t r)` where `p_t` is the diffused
//! base at the current noise level and `beta_t` ramps the reward in.

mod doublewell;
mod gmm;
mod reward;

pub use doublewell::DoubleWellSpec;
pub use gmm::{GmmEval, GmmSpec};
pub use reward::{QuadraticReward, RewardSchedule, RewardScheduleKind};

use std::sync::Arc;

use crate::error::{Error, Result};

/// Pluggable diffused base model.
///
/// The engine only ever queries the model at a noise level `sigma`; learned
/// score networks can back this trait later. Log-density and Laplacian are
/// optional because learned models usually lack them.
pub trait ScoreModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Score `grad log p_sigma(x)` written into `out`.
    fn score(&self, sigma: f64, x: &[f64], out: &mut [f64]);

    fn log_density(&self, _sigma: f64, _x: &[f64]) -> Option<f64> {
        None
    }

    fn score_laplacian(&self, _sigma: f64, _x: &[f64]) -> Option<f64> {
        None
    }
}

impl ScoreModel for GmmSpec {
    fn dim(&self) -> usize {
        GmmSpec::dim(self)
    }

    fn score(&self, sigma: f64, x: &[f64], out: &mut [f64]) {
        self.diffused_score(sigma, x, out);
    }

    fn log_density(&self, sigma: f64, x: &[f64]) -> Option<f64> {
        Some(self.diffused_logpdf(sigma, x))
    }

    fn score_laplacian(&self, sigma: f64, x: &[f64]) -> Option<f64> {
        Some(self.diffused_score_laplacian(sigma, x))
    }
}

/// A retargeting task: base model, annealing factor, optional reward.
#[derive(Clone)]
pub struct TargetSpec {
    base: Arc<dyn ScoreModel>,
    /// Analytic mixture handle when the base is a GMM; enables fused
    /// evaluation and exact references.
    gmm: Option<Arc<GmmSpec>>,
    pub gamma: f64,
    pub reward: Option<QuadraticReward>,
    pub reward_schedule: Option<RewardSchedule>,
}

/// Time-interpolated reward quantities at one `(t, x)`.
#[derive(Debug, Clone)]
pub struct RewardPack {
    /// `r_t = beta_t r(x)`.
    pub value: f64,
    /// `grad r_t = beta_t grad r(x)`.
    pub grad: Vec<f64>,
    /// `lap r_t`.
    pub laplacian: f64,
    /// `d r_t / dt = beta_dot r(x)`.
    pub time_derivative: f64,
}

impl TargetSpec {
    pub fn annealed_gmm(gmm: GmmSpec, gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(Error::InvalidSpec(format!("gamma must be >= 1, got {gamma}")));
        }
        let gmm = Arc::new(gmm);
        Ok(Self {
            base: gmm.clone(),
            gmm: Some(gmm),
            gamma,
            reward: None,
            reward_schedule: None,
        })
    }

    pub fn rewarded_gmm(
        gmm: GmmSpec,
        gamma: f64,
        reward: QuadraticReward,
        schedule: RewardSchedule,
    ) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(Error::InvalidSpec(format!("gamma must be >= 1, got {gamma}")));
        }
        if reward.dim() != GmmSpec::dim(&gmm) {
            return Err(Error::DimensionMismatch {
                expected: GmmSpec::dim(&gmm),
                got: reward.dim(),
                context: "reward center",
            });
        }
        let gmm = Arc::new(gmm);
        Ok(Self {
            base: gmm.clone(),
            gmm: Some(gmm),
            gamma,
            reward: Some(reward),
            reward_schedule: Some(schedule),
        })
    }

    /// Wrap an arbitrary score model (no analytic mixture available).
    pub fn from_model(
        base: Arc<dyn ScoreModel>,
        gamma: f64,
        reward: Option<QuadraticReward>,
        schedule: Option<RewardSchedule>,
    ) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(Error::InvalidSpec(format!("gamma must be >= 1, got {gamma}")));
        }
        if reward.is_some() != schedule.is_some() {
            return Err(Error::InvalidSpec(
                "reward and reward schedule must be provided together".into(),
            ));
        }
        Ok(Self {
            base,
            gmm: None,
            gamma,
            reward,
            reward_schedule: schedule,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &dyn ScoreModel {
        self.base.as_ref()
    }

    pub fn gmm(&self) -> Option<&GmmSpec> {
        self.gmm.as_deref()
    }

    pub fn has_reward(&self) -> bool {
        self.reward.is_some()
    }

    /// `r_t(x)` and friends at backward time `t`.
    pub fn reward_pack(&self, t: f64, x: &[f64]) -> Result<RewardPack> {
        let reward = self
            .reward
            .as_ref()
            .ok_or(Error::RewardAbsent("reward_pack on pure-annealing target"))?;
        let schedule = self
            .reward_schedule
            .as_ref()
            .ok_or(Error::RewardAbsent("reward schedule missing"))?;
        let beta = schedule.beta(t);
        let beta_dot = schedule.beta_dot(t);
        let raw = reward.value(x);
        let mut grad = vec![0.0; reward.dim()];
        reward.grad(x, &mut grad);
        for g in grad.iter_mut() {
            *g *= beta;
        }
        Ok(RewardPack {
            value: beta * raw,
            grad,
            laplacian: beta * reward.laplacian(),
            time_derivative: beta_dot * raw,
        })
    }

    pub fn reward_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.reward_pack(t, x)?.value)
    }

    pub fn reward_grad(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.reward_pack(t, x)?.grad)
    }

    pub fn reward_laplacian(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.reward_pack(t, x)?.laplacian)
    }

    pub fn reward_time_derivative(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.reward_pack(t, x)?.time_derivative)
    }

    /// Unnormalized final-target log-density
    /// `log q~(x) = gamma log p(x) + r(x)`, available when the base exposes
    /// a log-density. This is the quantity metrics difference against.
    pub fn final_unnormalized_logpdf(&self, x: &[f64]) -> Option<f64> {
        let logp = self.base.log_density(0.0, x)?;
        let r = self.reward.as_ref().map(|r| r.value(x)).unwrap_or(0.0);
        Some(self.gamma * logp + r)
    }
}
