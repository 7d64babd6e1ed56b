//! Error types shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Schedule parameters violate `0 < sigma_min < sigma_max`, `rho > 0`.
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    /// Target, ensemble, or config construction failed a structural check.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Mismatched vector lengths between caller and engine state.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// A reward-dependent operation was called on a pure-annealing target.
    #[error("reward absent: {0}")]
    RewardAbsent(&'static str),

    /// Non-finite drift, potential, or input detected at a given step.
    #[error("non-finite value at step {step}: {context}")]
    NonFinite { step: usize, context: String },

    /// Too many particles left the finite range; the run cannot continue.
    #[error("run diverged at step {step}: {fraction:.3} of particles non-finite")]
    Diverged { step: usize, fraction: f64 },

    /// Langevin chain energy exceeded the configured ceiling.
    #[error("langevin chain diverged at step {step}: energy {energy:.3e} above ceiling")]
    EnergyDiverged { step: usize, energy: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
