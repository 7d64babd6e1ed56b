//! Per-step diagnostics collected during a run.

use serde::{Deserialize, Serialize};

/// One trace row, serialized as one JSONL object per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Backward time at the start of the step.
    pub t: f64,
    /// Noise level at the start of the step.
    pub sigma: f64,
    /// ESS fraction after the weight update (before any resampling).
    pub ess: f64,
    /// Weighted variance of the residual potential over the pre-update
    /// ensemble.
    pub var_phi: f64,
    /// Weighted variance of the potential before this step's control was
    /// applied (equals `var_phi` for uncontrolled methods).
    pub var_g: f64,
    /// Control coefficients solved at this step (empty for uncontrolled
    /// methods).
    pub theta: Vec<f64>,
    pub resampled: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    /// Parent index multiset for each resampling event, keyed by step.
    pub resample_parents: Vec<(usize, Vec<u32>)>,
    /// Steps where the control solve fell back to zero.
    pub solver_fallbacks: Vec<usize>,
    /// Steps where non-finite particles were neutralized (count attached).
    pub neutralized: Vec<(usize, usize)>,
    pub wall_time_secs: f64,
}

impl RunTrace {
    pub fn ess_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ess).collect()
    }

    pub fn var_phi_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.var_phi).collect()
    }

    /// Median of `var_phi` over the middle half of the trajectory,
    /// the window used by the stabilization checks.
    pub fn mid_trajectory_var_median(&self) -> f64 {
        let m = self.records.len();
        let lo = m / 4;
        let hi = (3 * m) / 4;
        let mut window: Vec<f64> = self.records[lo..hi].iter().map(|r| r.var_phi).collect();
        window.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if window.is_empty() {
            return f64::NAN;
        }
        let mid = window.len() / 2;
        if window.len() % 2 == 1 {
            window[mid]
        } else {
            0.5 * (window[mid - 1] + window[mid])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize, var_phi: f64) -> StepRecord {
        StepRecord {
            step,
            t: step as f64,
            sigma: 50.0 - step as f64,
            ess: 1.0,
            var_phi,
            var_g: var_phi,
            theta: vec![],
            resampled: false,
        }
    }

    #[test]
    fn mid_trajectory_median_uses_middle_half() {
        let trace = RunTrace {
            records: (0..8).map(|k| record(k, k as f64)).collect(),
            ..Default::default()
        };
        // middle half is steps 2..6 -> values [2,3,4,5], median 3.5
        assert!((trace.mid_trajectory_var_median() - 3.5).abs() < 1e-12);
    }
}
