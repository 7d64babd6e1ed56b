//! Ground-truth oracles: exact annealed-mixture samples by rejection,
//! closed-form posterior mixtures for quadratic rewards, and underdamped
//! Langevin chains for Boltzmann targets.

mod langevin;
mod posterior;
mod rejection;

pub use langevin::{baoab_sample, BaoabChain, Dw4Potential, LangevinConfig, Potential};
pub use posterior::posterior_gmm;
pub use rejection::{sample_annealed_gmm, RejectionOutput, RejectionStats};
