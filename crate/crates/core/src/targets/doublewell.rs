//! Four-particle double-well system in two dimensions.
//!
//! The pair potential acts on interparticle distances with two minima at
//! `d = d0 +- (2/3) sqrt(5)` under the default parameters, plus a harmonic
//! term confining the spread around the centroid. The reduced energy
//! (Hamiltonian over temperature) is the negative log-density of the
//! Boltzmann target.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWellSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d0: f64,
    /// Harmonic confinement strength.
    pub lambda: f64,
    pub temperature: f64,
    pub n_particles: usize,
    pub dim: usize,
}

impl Default for DoubleWellSpec {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: -4.0,
            c: 0.9,
            d0: 4.0,
            lambda: 0.05,
            temperature: 1.0,
            n_particles: 4,
            dim: 2,
        }
    }
}

impl DoubleWellSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "quartic coefficient must be > 0 for confinement, got {}",
                self.c
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidSpec("temperature must be > 0".into()));
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        self.n_particles * self.dim
    }

    fn pair_term(&self, d: f64) -> f64 {
        let s = d - self.d0;
        self.a * s + self.b * s * s + self.c * s.powi(4)
    }

    fn pair_term_deriv(&self, d: f64) -> f64 {
        let s = d - self.d0;
        self.a + 2.0 * self.b * s + 4.0 * self.c * s.powi(3)
    }

    /// Pair Hamiltonian plus harmonic confinement, without the 1/T factor.
    pub fn hamiltonian(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.total_dim());
        let n = self.n_particles;
        let d = self.dim;
        let mut h = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut sq = 0.0;
                for a in 0..d {
                    let diff = x[i * d + a] - x[j * d + a];
                    sq += diff * diff;
                }
                h += 0.5 * self.pair_term(sq.sqrt());
            }
        }
        let mut centroid = vec![0.0; d];
        for i in 0..n {
            for a in 0..d {
                centroid[a] += x[i * d + a] / n as f64;
            }
        }
        let mut spread = 0.0;
        for i in 0..n {
            for a in 0..d {
                let diff = x[i * d + a] - centroid[a];
                spread += diff * diff;
            }
        }
        h + 0.5 * self.lambda * spread
    }

    /// Reduced energy `(1/T)(H + confinement)`; the Boltzmann target is
    /// `exp(-energy)`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.hamiltonian(x) / self.temperature
    }

    /// Negative gradient of [`Self::energy`], written into `out`.
    pub fn force(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.total_dim());
        debug_assert_eq!(out.len(), self.total_dim());
        let n = self.n_particles;
        let d = self.dim;
        out.fill(0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut sq = 0.0;
                for a in 0..d {
                    let diff = x[i * d + a] - x[j * d + a];
                    sq += diff * diff;
                }
                let dist = sq.sqrt().max(1e-12);
                let coef = 0.5 * self.pair_term_deriv(dist) / dist;
                for a in 0..d {
                    let diff = x[i * d + a] - x[j * d + a];
                    out[i * d + a] -= coef * diff;
                    out[j * d + a] += coef * diff;
                }
            }
        }
        // Gradient of (lambda/2) sum ||r_i - centroid||^2 w.r.t. r_i is
        // lambda (r_i - centroid); the centroid terms cancel.
        let mut centroid = vec![0.0; d];
        for i in 0..n {
            for a in 0..d {
                centroid[a] += x[i * d + a] / n as f64;
            }
        }
        for i in 0..n {
            for a in 0..d {
                out[i * d + a] -= self.lambda * (x[i * d + a] - centroid[a]);
            }
        }
        let inv_t = 1.0 / self.temperature;
        for o in out.iter_mut() {
            *o *= inv_t;
        }
    }

    /// Location of the two pair-distance minima, `d0 +- sqrt(-b / (2c))`.
    pub fn pair_minima(&self) -> (f64, f64) {
        let s = (-self.b / (2.0 * self.c)).sqrt();
        (self.d0 - s, self.d0 + s)
    }
}
