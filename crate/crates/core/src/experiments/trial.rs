//! One trial and many.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{draw_errors, group_considered_probability, group_count, max_sybil_collapse, GuessModel, GuessVector};
use crate::channel::mix;
use crate::classification::Policy;
use crate::error::Result;
use crate::protocol::{classify_round, run_round, AbortReason, ClassificationGate, RoundDecision, RoundOutcome, Trace};
use crate::world::{Truth, World};

use super::scenario::build_world;
use super::{Mode, ScenarioConfig};

/// Seed of trial `index`, derived from the master seed alone.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    mix(master.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Counts over identities other than the initiator; Sybil is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub abort: Option<AbortReason>,
    pub deferred: bool,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Identities left out of the confusion matrix (aborted or deferred).
    pub unclassified: u64,
    /// Identities rejected by the protocol (late, moving, too few probes).
    pub rejected: u64,
    /// Conforming identities classified as Sybil.
    pub collapsed: u64,
    pub accepted: u64,
    pub accepted_sybil: u64,
    pub final_sybil_ratio: f64,
    pub condition1_held: bool,
    pub condition3_held: bool,
    #[serde(skip)]
    pub wall_ms: f64,
}

impl TrialResult {
    pub fn confusion(&self) -> Confusion {
        Confusion { tp: self.tp, fp: self.fp, tn: self.tn, fn_: self.fn_ }
    }

    fn set_confusion(&mut self, c: Confusion) {
        (self.tp, self.fp, self.tn, self.fn_) = (c.tp, c.fp, c.tn, c.fn_);
    }

    fn empty(trial: usize, seed: u64) -> Self {
        Self {
            trial,
            seed,
            abort: None,
            deferred: false,
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
            unclassified: 0,
            rejected: 0,
            collapsed: 0,
            accepted: 0,
            accepted_sybil: 0,
            final_sybil_ratio: 0.0,
            condition1_held: true,
            condition3_held: true,
            wall_ms: 0.0,
        }
    }

    fn finish(&mut self, conforming: usize, lns: usize) {
        self.final_sybil_ratio = if self.accepted == 0 { 0.0 } else { self.accepted_sybil as f64 / self.accepted as f64 };
        self.condition1_held = self.collapsed == 0;
        let need = conforming.saturating_sub(lns) as u64;
        self.condition3_held = !(need == 0 || self.collapsed >= need);
    }
}

/// Work shared by every trial of one scenario.
struct Context {
    model: GuessModel,
    guesses: Vec<GuessVector>,
    considered: f64,
}

impl Context {
    fn new(cfg: &ScenarioConfig) -> Self {
        let model = GuessModel::from_strategy(&cfg.attacker, cfg.channel.quantization);
        let c = cfg.counts.conforming;
        let (groups, considered) = match cfg.classifier.policy {
            Policy::Consistency => (group_count(cfg.sybil_count() + cfg.counts.lying_nonsybil, cfg.attacker.group_size), 1.0),
            Policy::MaxSybil => (
                group_count(cfg.sybil_count(), cfg.attacker.group_size),
                group_considered_probability(cfg.attacker.group_size, c, cfg.classifier.n),
            ),
        };
        let guesses = if cfg.mode == Mode::GuessModel { model.guesses(c, groups) } else { Vec::new() };
        Self { model, guesses, considered }
    }
}

/// Runs trial `index` of a scenario.
pub fn run_trial(cfg: &ScenarioConfig, index: usize) -> Result<TrialResult> {
    cfg.validate()?;
    trial_with(&Context::new(cfg), cfg, index)
}

fn trial_with(ctx: &Context, cfg: &ScenarioConfig, index: usize) -> Result<TrialResult> {
    let start = Instant::now();
    let seed = trial_seed(cfg.seed, index);
    let mut r = match cfg.mode {
        Mode::Pipeline => pipeline_trial(cfg, index, seed)?,
        Mode::GuessModel => guess_trial(ctx, cfg, index, seed),
    };
    r.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}

fn pipeline_round(cfg: &ScenarioConfig, seed: u64) -> Result<(World, RoundOutcome)> {
    let world = build_world(cfg, seed)?;
    let mut protocol = cfg.protocol.clone();
    protocol.motion_std = cfg.classifier.motion_std;
    let outcome = run_round(&world, &protocol, mix(seed ^ 2))?;
    Ok((world, outcome))
}

/// Protocol trace of trial `index`; `None` in guess-model mode, which runs
/// no protocol.
pub fn trial_trace(cfg: &ScenarioConfig, index: usize) -> Result<Option<Trace>> {
    if cfg.mode != Mode::Pipeline {
        return Ok(None);
    }
    cfg.validate()?;
    Ok(Some(pipeline_round(cfg, trial_seed(cfg.seed, index))?.1.trace))
}

fn pipeline_trial(cfg: &ScenarioConfig, index: usize, seed: u64) -> Result<TrialResult> {
    let (world, outcome) = pipeline_round(cfg, seed)?;
    let mut gate = ClassificationGate::default();
    let decision = classify_round(&mut gate, &outcome, &cfg.classifier.config(mix(seed ^ 3)), cfg.classifier.policy)?;

    let i0 = world.initiator;
    let truths = world.truths();
    let others = truths.len() as u64 - 1;
    let mut r = TrialResult::empty(index, seed);
    r.rejected = outcome.rejected.len() as u64;
    let result = match decision {
        RoundDecision::Aborted(a) => {
            r.abort = Some(a);
            r.unclassified = others;
            return Ok(r);
        }
        RoundDecision::Deferred => {
            r.deferred = true;
            r.unclassified = others;
            return Ok(r);
        }
        RoundDecision::Classified(res) => res,
    };
    let view = &result.selected_view;
    let (mut conforming, mut lns) = (0, 0);
    for (&id, &truth) in truths.iter().filter(|(id, _)| **id != i0) {
        match truth {
            Truth::Conforming => conforming += 1,
            Truth::LyingNonsybil => lns += 1,
            Truth::Sybil => {}
        }
        let positive = view.is_sybil_like(id);
        if !positive && !view.is_nonsybil(id) {
            r.unclassified += 1;
            continue;
        }
        match (truth.is_sybil(), positive) {
            (true, true) => r.tp += 1,
            (true, false) => r.fn_ += 1,
            (false, true) => r.fp += 1,
            (false, false) => r.tn += 1,
        }
        if positive && truth == Truth::Conforming {
            r.collapsed += 1;
        }
        if !positive {
            r.accepted += 1;
            if truth.is_sybil() {
                r.accepted_sybil += 1;
            }
        }
    }
    r.finish(conforming, lns);
    Ok(r)
}

/// Samples the guessing game only: the attacker's per-target errors and the
/// groups' hits, with no radio simulation.
fn guess_trial(ctx: &Context, cfg: &ScenarioConfig, index: usize, seed: u64) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = cfg.counts.conforming;
    let lns = cfg.counts.lying_nonsybil;
    let m = cfg.sybil_count() as u64;
    let honest = (c + lns) as u64;
    let errors = draw_errors(c, ctx.model.sigma_pred, &mut rng);
    let mut r = TrialResult::empty(index, seed);
    let k = match cfg.classifier.policy {
        Policy::Consistency => {
            let k = ctx.model.best_hits(&ctx.guesses, &errors) as u64;
            let need = c.saturating_sub(lns) as u64;
            if need == 0 || k >= need {
                // The attacker's view wins: every Sybil is accepted.
                r.set_confusion(Confusion { tp: 0, fn_: m, fp: k, tn: honest - k });
                r.accepted = honest - k + m;
                r.accepted_sybil = m;
            } else {
                r.set_confusion(Confusion { tp: m, fn_: 0, fp: 0, tn: honest });
                r.accepted = honest;
                r.collapsed = 0;
                r.finish(c, lns);
                return r;
            }
            k
        }
        Policy::MaxSybil => {
            let k = max_sybil_collapse(&ctx.model, &ctx.guesses, ctx.considered, &errors, &mut rng) as u64;
            // Each collapsed target lets one Sybil through.
            let k = k.min(m);
            r.set_confusion(Confusion { tp: m - k, fn_: k, fp: k, tn: honest - k });
            r.accepted = honest;
            r.accepted_sybil = k;
            k
        }
    };
    r.collapsed = k;
    r.finish(c, lns);
    r
}

/// Runs every trial of a scenario in parallel. Results come back in trial
/// order and do not depend on the number of worker threads.
pub fn run_trials(cfg: &ScenarioConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let ctx = Context::new(cfg);
    (0..cfg.trials).into_par_iter().map(|k| trial_with(&ctx, cfg, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;

    #[test]
    fn trial_seeds_differ_and_repeat() {
        assert_eq!(trial_seed(1, 0), trial_seed(1, 0));
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn honest_noise_free_scenario_accepts_everyone() {
        let mut cfg = ScenarioConfig::default();
        cfg.counts.attacker_nodes = 0;
        cfg.channel = ChannelModel::noise_free();
        cfg.trials = 4;
        for r in run_trials(&cfg).unwrap() {
            assert_eq!(r.tp + r.fn_, 0);
            assert_eq!(r.fp, 0, "{r:?}");
            assert_eq!(r.final_sybil_ratio, 0.0);
            assert_eq!(r.confusion().total() + r.unclassified, 10);
        }
    }

    #[test]
    fn guess_model_bookkeeping() {
        let mut cfg = ScenarioConfig { mode: Mode::GuessModel, trials: 200, ..Default::default() };
        cfg.counts.conforming = 12;
        cfg.counts.lying_nonsybil = 3;
        cfg.attacker.sybils_per_node = 12;
        for policy in [Policy::Consistency, Policy::MaxSybil] {
            cfg.classifier.policy = policy;
            for r in run_trials(&cfg).unwrap() {
                assert_eq!(r.confusion().total(), 12 + 3 + 12);
                assert!((0.0..=1.0).contains(&r.final_sybil_ratio));
            }
        }
    }

    #[test]
    fn omniscient_consistency_attacker_always_breaks() {
        let mut cfg = ScenarioConfig { mode: Mode::GuessModel, trials: 50, ..Default::default() };
        cfg.attacker.sigma_pred = 0.0;
        cfg.classifier.policy = Policy::Consistency;
        assert!(run_trials(&cfg).unwrap().iter().all(|r| !r.condition3_held && r.collapsed == 10));
    }
}
