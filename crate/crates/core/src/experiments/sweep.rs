//! Aggregates over a (conforming, lying non-Sybil) grid.

use serde::Serialize;

use crate::adversary::{condition3_break_probability, group_count, GuessModel};
use crate::classification::{conforming_probability, Policy};
use crate::error::Result;

use super::stats::Summary;
use super::trial::run_trials;
use super::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub conforming: usize,
    pub lying_nonsybil: usize,
    pub policy: Policy,
    pub trials: usize,
    pub sybil_ratio_mean: f64,
    pub sybil_ratio_lo: f64,
    pub sybil_ratio_hi: f64,
    pub condition3_breaks: usize,
    /// Chance that candidate growth yields an all-conforming receiver set.
    pub conforming_probability: Option<f64>,
    /// Lower bound on the consistency condition holding, from the relaxed
    /// attacker; consistency policy only.
    pub condition3_bound: Option<f64>,
}

/// One row per grid point, conforming-major. Every point reuses the
/// scenario's master seed.
pub fn sweep_grid(cfg: &ScenarioConfig) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &c in &cfg.sweep.conforming {
        for &lns in &cfg.sweep.lying_nonsybil {
            let mut point = cfg.clone();
            point.counts.conforming = c;
            point.counts.lying_nonsybil = lns;
            let trials = run_trials(&point)?;
            let s = Summary::from_trials(&trials);
            let gamma = point.classifier.gamma();
            let bound = match point.classifier.policy {
                Policy::Consistency => {
                    let model = GuessModel::from_strategy(&point.attacker, point.channel.quantization);
                    let groups = group_count(point.sybil_count() + lns, point.attacker.group_size);
                    let est = condition3_break_probability(c, lns, &model, groups, point.trials.max(1000), point.seed)?;
                    Some(est.holds_lower_bound())
                }
                Policy::MaxSybil => None,
            };
            rows.push(SweepRow {
                conforming: c,
                lying_nonsybil: lns,
                policy: point.classifier.policy,
                trials: s.trials,
                sybil_ratio_mean: s.sybil_ratio_mean,
                sybil_ratio_lo: s.sybil_ratio_lo,
                sybil_ratio_hi: s.sybil_ratio_hi,
                condition3_breaks: s.condition3_breaks,
                conforming_probability: conforming_probability(c, lns, gamma.n, &gamma).ok(),
                condition3_bound: bound,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Mode;

    #[test]
    fn liar_free_column_has_probability_one() {
        let mut cfg = ScenarioConfig { mode: Mode::GuessModel, trials: 50, ..Default::default() };
        cfg.sweep.conforming = vec![6, 12];
        cfg.sweep.lying_nonsybil = vec![0, 3];
        let rows = sweep_grid(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[1].conforming, rows[1].lying_nonsybil), (6, 3));
        for r in rows.iter().filter(|r| r.lying_nonsybil == 0) {
            assert_eq!(r.conforming_probability, Some(1.0));
        }
    }
}
