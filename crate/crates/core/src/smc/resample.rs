//! Systematic resampling.

use super::ensemble::ParticleEnsemble;

/// Parent index for each offspring slot from a single uniform `u` in
/// `[0, 1/N)` striding the weight CDF at `1/N` intervals.
pub fn systematic_parents(weights: &[f64], u: f64) -> Vec<u32> {
    let n = weights.len();
    debug_assert!(u >= 0.0 && u < 1.0 / n as f64);
    let mut parents = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0usize;
    for j in 0..n {
        let point = u + j as f64 / n as f64;
        while point >= cum && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        parents.push(i as u32);
    }
    parents
}

/// Replace the ensemble by the offspring of `parents` and reset weights to
/// uniform.
pub fn apply_parents(ensemble: &mut ParticleEnsemble, parents: &[u32]) {
    let dim = ensemble.dim();
    let old = ensemble.positions().to_vec();
    let positions = ensemble.positions_mut();
    for (j, &p) in parents.iter().enumerate() {
        let src = &old[p as usize * dim..(p as usize + 1) * dim];
        positions[j * dim..(j + 1) * dim].copy_from_slice(src);
    }
    ensemble.reset_uniform_weights();
}
