//! Small numeric helpers: log-sum-exp, dot products, weighted moments.

/// Log-sum-exp with max subtraction. Returns `-inf` for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + sum.ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Weighted mean of scalar values; weights are assumed normalized.
pub fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Weighted variance around the weighted mean; weights normalized.
pub fn weighted_variance(weights: &[f64], values: &[f64]) -> f64 {
    let m = weighted_mean(weights, values);
    weights
        .iter()
        .zip(values)
        .map(|(w, v)| {
            let d = v - m;
            w * d * d
        })
        .sum()
}

/// Weighted mean vector of flat `n x d` points.
pub fn weighted_mean_vec(weights: &[f64], points: &[f64], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; dim];
    for (i, w) in weights.iter().enumerate() {
        let row = &points[i * dim..(i + 1) * dim];
        for (m, x) in mean.iter_mut().zip(row) {
            *m += w * x;
        }
    }
    mean
}

/// Weighted covariance matrix (row-major `d x d`) of flat `n x d` points.
pub fn weighted_covariance(weights: &[f64], points: &[f64], dim: usize) -> Vec<f64> {
    let mean = weighted_mean_vec(weights, points, dim);
    let mut cov = vec![0.0; dim * dim];
    let mut centered = vec![0.0; dim];
    for (i, w) in weights.iter().enumerate() {
        let row = &points[i * dim..(i + 1) * dim];
        for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = x - m;
        }
        for a in 0..dim {
            let wa = w * centered[a];
            for b in 0..dim {
                cov[a * dim + b] += wa * centered[b];
            }
        }
    }
    cov
}
