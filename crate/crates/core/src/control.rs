//! Per-step linear systems for the control coefficients.
//!
//! The variance route minimizes `Var_w[g + sum_i theta_i h_i]` over the
//! weighted ensemble, which is the least-squares system
//! `A theta = c` with `A_ij = Cov_w(h_i, h_j)` and `c_i = -Cov_w(g, h_i)`.
//! The energy route performs Ritz minimization of the Poisson energy
//! functional in a scalar basis, giving `A_ij = E_w[grad s_i . grad s_j]`
//! and `c_i = E_w[(g - mean g) s_i]`.
//!
//! Moments are centered empirically: the population identities
//! `E_q[h] = 0`, `E_q[g] = 0` hold only in the mean-field limit, and the
//! centered form is the exact in-sample variance objective.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::{dot, weighted_mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    Vcg,
    Ecg,
}

/// Assembled `n x n` system, solved in place by [`solve_regularized`].
#[derive(Debug, Clone)]
pub struct ControlSystem {
    pub mode: ControlMode,
    pub n: usize,
    /// Row-major symmetric matrix.
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    /// Relative Tikhonov strength; the solve adds `ridge * tr(A)/n` to the
    /// diagonal.
    pub ridge: f64,
    pub theta: Option<Vec<f64>>,
    /// Set when the factorization failed and the zero control was used.
    pub fell_back: bool,
}

fn check_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: 0,
            context: context.to_string(),
        });
    }
    Ok(())
}

/// Variance-route assembly from per-particle potentials.
///
/// `h_vals[i]` holds basis i's control potential at every particle.
pub fn assemble_vcg(
    weights: &[f64],
    g_vals: &[f64],
    h_vals: &[Vec<f64>],
    ridge: f64,
) -> Result<ControlSystem> {
    let n = h_vals.len();
    check_finite(g_vals, "vcg potential values")?;
    for h in h_vals {
        debug_assert_eq!(h.len(), weights.len());
        check_finite(h, "vcg basis potentials")?;
    }
    let m_g = weighted_mean(weights, g_vals);
    let m_h: Vec<f64> = h_vals.iter().map(|h| weighted_mean(weights, h)).collect();
    let mut a = vec![0.0; n * n];
    let mut c = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for (p, w) in weights.iter().enumerate() {
                acc += w * (h_vals[i][p] - m_h[i]) * (h_vals[j][p] - m_h[j]);
            }
            a[i * n + j] = acc;
            a[j * n + i] = acc;
        }
        let mut acc = 0.0;
        for (p, w) in weights.iter().enumerate() {
            acc += w * (g_vals[p] - m_g) * (h_vals[i][p] - m_h[i]);
        }
        c[i] = -acc;
    }
    Ok(ControlSystem {
        mode: ControlMode::Vcg,
        n,
        a,
        c,
        ridge,
        theta: None,
        fell_back: false,
    })
}

/// Energy-route assembly from scalar basis values and their gradients.
///
/// `s_vals[i]` holds basis i's scalar values; `grad_s[i]` the flat `N x d`
/// gradients. The scalar values are centered as well: the right-hand side is
/// invariant to shifting `s_i` because `g` is centered, and centering keeps
/// the accumulation well scaled.
pub fn assemble_ecg(
    weights: &[f64],
    g_vals: &[f64],
    s_vals: &[Vec<f64>],
    grad_s: &[Vec<f64>],
    dim: usize,
    ridge: f64,
) -> Result<ControlSystem> {
    let n = s_vals.len();
    assert_eq!(grad_s.len(), n);
    check_finite(g_vals, "ecg potential values")?;
    for s in s_vals {
        check_finite(s, "ecg scalar bases")?;
    }
    for g in grad_s {
        check_finite(g, "ecg basis gradients")?;
    }
    let m_g = weighted_mean(weights, g_vals);
    let m_s: Vec<f64> = s_vals.iter().map(|s| weighted_mean(weights, s)).collect();
    let mut a = vec![0.0; n * n];
    let mut c = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for (p, w) in weights.iter().enumerate() {
                let gi = &grad_s[i][p * dim..(p + 1) * dim];
                let gj = &grad_s[j][p * dim..(p + 1) * dim];
                acc += w * dot(gi, gj);
            }
            a[i * n + j] = acc;
            a[j * n + i] = acc;
        }
        let mut acc = 0.0;
        for (p, w) in weights.iter().enumerate() {
            acc += w * (g_vals[p] - m_g) * (s_vals[i][p] - m_s[i]);
        }
        c[i] = acc;
    }
    Ok(ControlSystem {
        mode: ControlMode::Ecg,
        n,
        a,
        c,
        ridge,
        theta: None,
        fell_back: false,
    })
}

/// Solve `(A + ridge tr(A)/n I) theta = c` by Cholesky factorization.
///
/// A failed factorization (singular or indefinite system) falls back to the
/// zero control, which is always valid: the dynamics stay exact for any
/// control, including none.
pub fn solve_regularized(sys: &mut ControlSystem) -> &[f64] {
    let n = sys.n;
    if n == 0 {
        sys.theta = Some(Vec::new());
        return sys.theta.as_deref().unwrap();
    }
    let trace: f64 = (0..n).map(|i| sys.a[i * n + i]).sum();
    let shift = sys.ridge * trace / n as f64;
    let mut mat = DMatrix::from_row_slice(n, n, &sys.a);
    for i in 0..n {
        mat[(i, i)] += shift;
    }
    let rhs = DVector::from_column_slice(&sys.c);
    match Cholesky::new(mat) {
        Some(chol) => {
            let theta = chol.solve(&rhs);
            if theta.iter().all(|t| t.is_finite()) {
                sys.theta = Some(theta.iter().copied().collect());
                sys.fell_back = false;
            } else {
                sys.theta = Some(vec![0.0; n]);
                sys.fell_back = true;
            }
        }
        None => {
            sys.theta = Some(vec![0.0; n]);
            sys.fell_back = true;
        }
    }
    sys.theta.as_deref().unwrap()
}

/// Cumulative control coefficients per time step, across refinement rounds.
///
/// Bases are fixed functions per step, so the effective control after round
/// `j` is the basis combination with the summed coefficients.
#[derive(Debug, Clone)]
pub struct ControlState {
    cumulative: Vec<Vec<f64>>,
}

impl ControlState {
    pub fn zeros(num_steps: usize, n: usize) -> Self {
        Self {
            cumulative: vec![vec![0.0; n]; num_steps],
        }
    }

    pub fn num_steps(&self) -> usize {
        self.cumulative.len()
    }

    pub fn cumulative(&self, step: usize) -> &[f64] {
        &self.cumulative[step]
    }

    pub fn add(&mut self, step: usize, theta: &[f64]) {
        let acc = &mut self.cumulative[step];
        debug_assert_eq!(acc.len(), theta.len());
        for (a, t) in acc.iter_mut().zip(theta) {
            *a += t;
        }
    }
}
