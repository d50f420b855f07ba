//! Aggregate statistics over trials.

use serde::Serialize;

use super::trial::TrialResult;

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` at 95% confidence.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One row of aggregate results. Rates without any eligible identity are
/// left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub aborted: usize,
    pub deferred: usize,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub sensitivity: Option<f64>,
    pub sensitivity_lo: Option<f64>,
    pub sensitivity_hi: Option<f64>,
    pub specificity: Option<f64>,
    pub specificity_lo: Option<f64>,
    pub specificity_hi: Option<f64>,
    pub sybil_ratio_mean: f64,
    pub sybil_ratio_lo: f64,
    pub sybil_ratio_hi: f64,
    pub condition3_breaks: usize,
    pub condition3_break_hi: f64,
}

impl Summary {
    /// Aggregates classified trials. The result depends only on the
    /// multiset of trials, not their order.
    pub fn from_trials(trials: &[TrialResult]) -> Self {
        let classified: Vec<&TrialResult> = trials.iter().filter(|t| t.abort.is_none() && !t.deferred).collect();
        let sum = |f: fn(&TrialResult) -> u64| classified.iter().map(|t| f(t)).sum::<u64>();
        let (tp, fp, tn, fn_) = (sum(|t| t.tp), sum(|t| t.fp), sum(|t| t.tn), sum(|t| t.fn_));
        let rate = |k: u64, n: u64| -> (Option<f64>, Option<f64>, Option<f64>) {
            if n == 0 {
                return (None, None, None);
            }
            let (lo, hi) = wilson_interval(k, n);
            (Some(k as f64 / n as f64), Some(lo), Some(hi))
        };
        let (sensitivity, sensitivity_lo, sensitivity_hi) = rate(tp, tp + fn_);
        let (specificity, specificity_lo, specificity_hi) = rate(tn, tn + fp);

        let m = classified.len();
        // Sorting makes the floating-point sum independent of trial order.
        let mut ratios: Vec<f64> = classified.iter().map(|t| t.final_sybil_ratio).collect();
        ratios.sort_by(f64::total_cmp);
        let (mean, lo, hi) = if m == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let mean = ratios.iter().sum::<f64>() / m as f64;
            let var = if m > 1 { ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
            let half = Z95 * (var / m as f64).sqrt();
            (mean, (mean - half).max(0.0), (mean + half).min(1.0))
        };
        let breaks = classified.iter().filter(|t| !t.condition3_held).count();
        Self {
            trials: trials.len(),
            aborted: trials.iter().filter(|t| t.abort.is_some()).count(),
            deferred: trials.iter().filter(|t| t.deferred).count(),
            tp,
            fp,
            tn,
            fn_,
            sensitivity,
            sensitivity_lo,
            sensitivity_hi,
            specificity,
            specificity_lo,
            specificity_hi,
            sybil_ratio_mean: mean,
            sybil_ratio_lo: lo,
            sybil_ratio_hi: hi,
            condition3_breaks: breaks,
            condition3_break_hi: wilson_interval(breaks as u64, m as u64).1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_hand_computation() {
        // 0 of 100000: upper limit z²/(n + z²) ≈ 3.84e-5.
        let (lo, hi) = wilson_interval(0, 100_000);
        assert_eq!(lo, 0.0);
        let expect = Z95 * Z95 / (100_000.0 + Z95 * Z95);
        assert!((hi - expect).abs() < 1e-12, "{hi} vs {expect}");
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }
}
