//! Threshold sweeps over honest receiver sets.
//!
//! Each trial runs the protocol, keeps the identities that passed the
//! motion filter, and forms signalprints from a receiver set of the
//! initiator plus the lowest-numbered conforming survivors. An identity is
//! clustered at threshold `t` exactly when its nearest neighbor lies within
//! `t`, so one nearest-neighbor distance per identity gives the whole curve.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::mix;
use crate::error::{Error, Result};
use crate::ids::IdentityId;
use crate::protocol::run_round;
use crate::signalprint::squared_distance_raw;
use crate::world::Truth;

use super::scenario::build_world;
use super::trial::trial_seed;
use super::ScenarioConfig;

/// Nearest-neighbor line distance of one identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocSample {
    pub trial: usize,
    pub identity: u32,
    pub sybil: bool,
    /// Infinite when no other identity shares two observers with it.
    pub nearest: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Nearest-neighbor distances of every surviving non-member in trial `index`.
pub fn roc_distances(cfg: &ScenarioConfig, index: usize) -> Result<Vec<RocSample>> {
    let seed = trial_seed(cfg.seed, index);
    let world = build_world(cfg, seed)?;
    let mut protocol = cfg.protocol.clone();
    protocol.motion_std = cfg.classifier.motion_std;
    let outcome = run_round(&world, &protocol, mix(seed ^ 2))?;
    let Some(obs) = outcome.observations.as_ref() else {
        return Ok(Vec::new());
    };
    let truths = world.truths();
    let mut members = vec![world.initiator];
    members.extend(
        obs.identities()
            .iter()
            .copied()
            .filter(|&x| x != world.initiator && truths[&x] == Truth::Conforming)
            .take(cfg.classifier.n.saturating_sub(1)),
    );
    if members.len() < 2 {
        return Err(Error::Config("too few conforming survivors for a receiver set".into()));
    }
    let others: Vec<IdentityId> = obs.identities().iter().copied().filter(|x| !members.contains(x)).collect();
    let prints: Vec<Vec<Option<f64>>> = others.iter().map(|&x| members.iter().map(|&m| obs.mean(m, x)).collect()).collect();
    let mut nearest = vec![f64::INFINITY; others.len()];
    for a in 0..others.len() {
        for b in a + 1..others.len() {
            if let Ok((d2, _)) = squared_distance_raw(&prints[a], &prints[b]) {
                let d = d2.sqrt();
                nearest[a] = nearest[a].min(d);
                nearest[b] = nearest[b].min(d);
            }
        }
    }
    // Identities heard by fewer than two members would be rejected.
    Ok(others
        .iter()
        .zip(prints.iter().zip(nearest))
        .filter(|(_, (p, _))| p.iter().flatten().count() >= 2)
        .map(|(&x, (_, d))| RocSample { trial: index, identity: x.0, sybil: truths[&x].is_sybil(), nearest: d })
        .collect())
}

/// Samples of every trial, in trial order.
pub fn roc_samples(cfg: &ScenarioConfig) -> Result<Vec<RocSample>> {
    cfg.validate()?;
    let per: Vec<Vec<RocSample>> = (0..cfg.trials).into_par_iter().map(|k| roc_distances(cfg, k)).collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// True and false positive rates at each threshold; distances equal to the
/// threshold count as clustered.
pub fn roc_curve(samples: &[RocSample], thresholds: &[f64]) -> Vec<RocPoint> {
    let pos = samples.iter().filter(|s| s.sybil).count().max(1) as f64;
    let neg = samples.iter().filter(|s| !s.sybil).count().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| {
            let tp = samples.iter().filter(|s| s.sybil && s.nearest <= t).count() as f64;
            let fp = samples.iter().filter(|s| !s.sybil && s.nearest <= t).count() as f64;
            RocPoint { threshold: t, tpr: tp / pos, fpr: fp / neg }
        })
        .collect()
}

/// Threshold maximizing TPR − FPR; the first one on ties.
pub fn knee(points: &[RocPoint]) -> Option<f64> {
    points
        .iter()
        .fold(None::<&RocPoint>, |best, p| match best {
            Some(b) if b.tpr - b.fpr >= p.tpr - p.fpr => Some(b),
            _ => Some(p),
        })
        .map(|p| p.threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(sybil: bool, nearest: f64) -> RocSample {
        RocSample { trial: 0, identity: 0, sybil, nearest }
    }

    #[test]
    fn curve_endpoints_and_knee() {
        let samples = [s(true, 0.1), s(true, 0.3), s(false, 2.0), s(false, f64::INFINITY)];
        let pts = roc_curve(&samples, &[0.0, 0.3, 1.0, 1e9, f64::INFINITY]);
        assert_eq!((pts[0].tpr, pts[0].fpr), (0.0, 0.0));
        assert_eq!((pts[1].tpr, pts[1].fpr), (1.0, 0.0));
        assert_eq!((pts[3].tpr, pts[3].fpr), (1.0, 0.5));
        assert_eq!((pts[4].tpr, pts[4].fpr), (1.0, 1.0));
        assert_eq!(knee(&pts), Some(0.3));
    }
}
