//! Brute-force cross-checks of the classifier.
//!
//! Small synthetic scenarios are built with exact, noise-free RSSI values so
//! that every answer is known. Three checks run on them:
//!
//! * the max-Sybil policy, applied to every size-`n` receiver set, never
//!   accepts more Sybils than it collapses conforming identities;
//! * the consistency policy picks the same view as an exhaustive search for
//!   the receiver set needing the fewest exclusions;
//! * the closed-form chance that candidate growth yields an all-conforming
//!   receiver set matches its empirical frequency.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{fabricate_observations, AttackerKind, AttackerStrategy, FabricationInput};
use crate::channel::{mix, ChannelModel};
use crate::classification::{
    build_receiver_sets, conforming_probability, find_consistent_subset, gamma_similar_with, max_sybil_over,
    Candidate, CandidateBuilder, ClassifierConfig, GammaConfig,
};
use crate::error::{Error, Result};
use crate::ids::IdentityId;
use crate::scalar::Scalar;
use crate::signalprint::{generate_view, ObservationMatrix, ReceiverSet, SignalprintThresholds, View};
use crate::world::Truth;

/// Grid every synthetic RSSI value is rounded to, dB.
pub const GRID: f64 = 1e-4;

/// How attacker-controlled identities report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lies {
    /// Independent uniform values.
    Random,
    /// Sybils report the truth; only non-Sybil liars lie.
    HonestSybils,
    /// Sybils know every true value and place conforming identities on
    /// their siblings' lines.
    Omniscient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseParams {
    pub conforming: usize,
    pub lying_nonsybil: usize,
    /// Identities claimed by the one attacker radio.
    pub sybils: usize,
    pub lies: Lies,
}

impl CaseParams {
    /// Identities including the initiator.
    pub fn identities(&self) -> usize {
        1 + self.conforming + self.lying_nonsybil + self.sybils
    }
}

/// A noise-free scenario with one probe per observation.
#[derive(Debug, Clone)]
pub struct Case {
    pub initiator: IdentityId,
    pub obs: ObservationMatrix<f64>,
    pub truth: BTreeMap<IdentityId, Truth>,
}

fn grid(v: f64) -> f64 {
    (v / GRID).round() * GRID
}

/// Builds a scenario: radios in a 15 m square, integer transmit powers,
/// log-distance path loss without shadowing. The initiator is identity 0;
/// the other numbers are shuffled.
pub fn synthetic_case(p: &CaseParams, seed: u64) -> Result<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = ChannelModel::noise_free();
    let radios = 1 + p.conforming + p.lying_nonsybil + usize::from(p.sybils > 0);
    let mut positions: Vec<[f64; 2]> = Vec::with_capacity(radios);
    while positions.len() < radios {
        let q = [rng.random::<f64>() * 15.0, rng.random::<f64>() * 15.0];
        if positions.iter().all(|o| (q[0] - o[0]).hypot(q[1] - o[1]) >= 0.5) {
            positions.push(q);
        }
    }

    let mut roles = vec![Truth::Conforming];
    roles.extend(std::iter::repeat_n(Truth::Conforming, p.conforming));
    roles.extend(std::iter::repeat_n(Truth::LyingNonsybil, p.lying_nonsybil));
    roles.extend(std::iter::repeat_n(Truth::Sybil, p.sybils));
    let n = roles.len();
    let mut numbers: Vec<u32> = (1..n as u32).collect();
    numbers.shuffle(&mut rng);
    let ids: Vec<IdentityId> = std::iter::once(0).chain(numbers).map(IdentityId).collect();
    // Radio of each identity; every Sybil shares the last radio.
    let radio: Vec<usize> = (0..n).map(|k| k.min(radios - 1)).collect();
    let tx: Vec<f64> = (0..n).map(|_| rng.random_range(0..=20) as f64).collect();

    let truth_value = |o: usize, x: usize| -> f64 {
        let (a, b) = (positions[radio[o]], positions[radio[x]]);
        grid(tx[x] - channel.path_loss((a[0] - b[0]).hypot(a[1] - b[1])))
    };
    let mut obs = ObservationMatrix::new(ids.iter().copied(), 1)?;
    for o in 0..n {
        for x in 0..n {
            if radio[o] != radio[x] {
                obs.set(ids[o], ids[x], 0, Some(truth_value(o, x)))?;
            }
        }
    }

    let liars: Vec<IdentityId> = (0..n).filter(|&k| roles[k] == Truth::LyingNonsybil).map(|k| ids[k]).collect();
    let sybils: Vec<IdentityId> = (0..n).filter(|&k| roles[k] == Truth::Sybil).map(|k| ids[k]).collect();
    for &l in &liars {
        for &x in &ids {
            if x != l {
                obs.set(l, x, 0, Some(grid(rng.random_range(-95.0..-30.0))))?;
            }
        }
    }
    match p.lies {
        Lies::HonestSybils => {}
        Lies::Random => {
            for &s in &sybils {
                for &x in &ids {
                    if x != s && !sybils.contains(&x) {
                        obs.set(s, x, 0, Some(grid(rng.random_range(-95.0..-30.0))))?;
                    }
                }
            }
        }
        Lies::Omniscient => {
            let strategy = AttackerStrategy {
                kind: AttackerKind::MaxSybilOptimal,
                sigma_pred: 0.0,
                group_size: (p.sybils / 2).max(1),
                ..AttackerStrategy::default()
            };
            let targets: Vec<IdentityId> = (1..n).filter(|&k| roles[k] == Truth::Conforming).map(|k| ids[k]).collect();
            let initiator_truth: BTreeMap<IdentityId, f64> = (1..n).map(|x| (ids[x], truth_value(0, x))).collect();
            let input = FabricationInput {
                initiator: ids[0],
                attacker: &sybils,
                sybils: &sybils,
                targets: &targets,
                universe: &ids,
                initiator_truth: &initiator_truth,
                step: GRID,
            };
            let fab = fabricate_observations(&strategy, &input, &mut rng);
            for ((o, x), v) in fab.reports {
                obs.set(o, x, 0, Some(grid(v)))?;
            }
        }
    }
    let truth = (0..n).map(|k| (ids[k], roles[k])).collect();
    Ok(Case { initiator: ids[0], obs, truth })
}

/// Every receiver set of exactly `size` members that starts with
/// `initiator`, the rest drawn from `others` in lexicographic order.
pub fn receiver_sets_of_size(initiator: IdentityId, others: &[IdentityId], size: usize) -> Vec<ReceiverSet> {
    let mut out = Vec::new();
    let k = size.saturating_sub(1);
    if k == 0 || k > others.len() {
        return out;
    }
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let mut members = vec![initiator];
        members.extend(pick.iter().map(|&i| others[i]));
        out.push(ReceiverSet::new(members).expect("distinct members"));
        let Some(pos) = (0..k).rev().find(|&i| pick[i] != i + others.len() - k) else {
            return out;
        };
        pick[pos] += 1;
        for j in pos + 1..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Ground-truth tally of one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundCheck {
    /// Sybil identities accepted as non-Sybil.
    pub accepted_sybils: usize,
    /// Non-Sybil identities, liars included, classified as Sybil or
    /// rejected.
    pub collapsed: usize,
}

impl BoundCheck {
    pub fn of(view: &View, truth: &BTreeMap<IdentityId, Truth>) -> Self {
        let accepted_sybils = view.nonsybil.iter().filter(|i| truth.get(i).is_some_and(|t| t.is_sybil())).count();
        let collapsed = truth
            .iter()
            .filter(|(i, t)| !t.is_sybil() && view.is_sybil_like(**i))
            .count();
        Self { accepted_sybils, collapsed }
    }

    pub fn holds(&self) -> bool {
        self.accepted_sybils <= self.collapsed
    }
}

/// Max-Sybil selection over every size-`n` receiver set containing the
/// initiator, scored against ground truth.
pub fn max_sybil_bound<S: Scalar>(case: &Case, t: &SignalprintThresholds<S>, n: usize) -> Result<BoundCheck> {
    let obs = case.obs.convert::<S>();
    let others: Vec<IdentityId> = obs.identities().iter().copied().filter(|i| *i != case.initiator).collect();
    let sets = receiver_sets_of_size(case.initiator, &others, n);
    let chosen = max_sybil_over(sets.iter(), &obs, t).ok_or_else(|| Error::InvalidReceiverSet("no receiver sets".into()))?;
    Ok(BoundCheck::of(&chosen.selected_view, &case.truth))
}

/// The exhaustive answer to "which receiver set permits the largest
/// consistent subset".
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveChoice {
    pub receiver_set: ReceiverSet,
    /// Fewest identities whose removal leaves the rest consistent.
    pub excluded: BTreeSet<IdentityId>,
    /// The receiver set's view with `excluded` moved to rejected.
    pub view: View,
}

/// Exhaustive consistency search.
///
/// For every size-`n` receiver set `R` containing the initiator, finds the
/// smallest set `E` of identities in `V_NS(R)` such that every receiver set
/// of size 2 to `n` drawn from the initiator plus `V_NS(R) \ E` generates a
/// view similar to `V(R)` at that size's tolerance. Returns the first `R`
/// with the smallest `E`.
pub fn exhaustive_consistent<S: Scalar>(
    initiator: IdentityId,
    obs: &ObservationMatrix<S>,
    cfg: &ClassifierConfig<S>,
) -> Result<ExhaustiveChoice> {
    let n = cfg.gamma.n;
    let others: Vec<IdentityId> = obs.identities().iter().copied().filter(|i| *i != initiator).collect();
    if others.len() > 24 {
        return Err(Error::Domain(format!("exhaustive search over {} identities is too large", others.len())));
    }
    let mut views: HashMap<Vec<IdentityId>, View> = HashMap::new();
    let mut view_of = |r: &ReceiverSet| -> View {
        views.entry(r.sorted_members()).or_insert_with(|| generate_view(r, obs, &cfg.thresholds)).clone()
    };

    let mut best: Option<ExhaustiveChoice> = None;
    for r in receiver_sets_of_size(initiator, &others, n) {
        let v = view_of(&r);
        let pool: Vec<IdentityId> = v.nonsybil.iter().copied().filter(|i| *i != initiator).collect();
        // Bit masks over `pool` of every receiver set whose view disagrees.
        let mut bad: Vec<u32> = Vec::new();
        for size in 2..=n {
            for sub in receiver_sets_of_size(initiator, &pool, size) {
                if !gamma_similar_with(&view_of(&sub), &v, cfg.gamma.for_size(size)) {
                    let mask = sub.members()[1..]
                        .iter()
                        .map(|m| 1u32 << pool.iter().position(|p| p == m).expect("drawn from pool"))
                        .fold(0, |a, b| a | b);
                    bad.push(mask);
                }
            }
        }
        let limit = best.as_ref().map_or(usize::MAX, |b| b.excluded.len());
        let Some(e) = smallest_hitting_set(&bad, pool.len(), limit) else { continue };
        let excluded: BTreeSet<IdentityId> = (0..pool.len()).filter(|k| e & (1 << k) != 0).map(|k| pool[k]).collect();
        let view = v.with_rejected(excluded.iter().copied());
        best = Some(ExhaustiveChoice { receiver_set: r, excluded, view });
    }
    best.ok_or_else(|| Error::InvalidReceiverSet("no receiver sets of the requested size".into()))
}

/// Smallest mask over `bits` elements meeting every mask in `sets`, if one
/// smaller than `limit` exists. Ties go to the numerically smallest mask.
fn smallest_hitting_set(sets: &[u32], bits: usize, limit: usize) -> Option<u32> {
    let mut best: Option<u32> = None;
    for e in 0u32..(1u32 << bits) {
        let size = e.count_ones() as usize;
        if size >= limit || best.is_some_and(|b| b.count_ones() as usize <= size) {
            continue;
        }
        if sets.iter().all(|s| s & e != 0) {
            best = Some(e);
        }
    }
    best
}

/// Noise-free classifier settings for exact comparisons: near-zero
/// distance thresholds and zero misclassification tolerance.
pub fn exact_config<S: Scalar>(n: usize, multiplier: usize, seed: u64) -> ClassifierConfig<S> {
    ClassifierConfig {
        thresholds: SignalprintThresholds::uniform(S::from_f64_lossy(GRID)),
        gamma: GammaConfig::exact(n),
        looseness: S::from_count(2),
        multiplier,
        ratio_tolerance: None,
        seed,
    }
}

/// Outcome of comparing the consistency policy to the exhaustive search on
/// one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub policy_view: View,
    pub oracle: ExhaustiveChoice,
    /// Some candidate consisted of the initiator and conforming identities
    /// only.
    pub truthful_candidate: bool,
}

impl OracleComparison {
    pub fn agrees(&self) -> bool {
        self.policy_view == self.oracle.view
    }
}

/// Which receiver sets the consistency policy chooses among.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidates {
    /// Grown by the candidate builder.
    Grown,
    /// Every size-`n` set containing the initiator.
    All,
}

pub fn compare_with_oracle<S: Scalar>(case: &Case, cfg: &ClassifierConfig<S>, from: Candidates) -> Result<OracleComparison> {
    let obs = case.obs.convert::<S>();
    let others: Vec<IdentityId> = obs.identities().iter().copied().filter(|i| *i != case.initiator).collect();
    let mut candidates = build_receiver_sets(case.initiator, &others, &obs, cfg)?;
    if from == Candidates::All {
        candidates.candidates = receiver_sets_of_size(case.initiator, &others, cfg.gamma.n)
            .into_iter()
            .map(|receiver_set| Candidate { receiver_set, short: false })
            .collect();
    }
    let truthful_candidate = candidates
        .receiver_sets()
        .any(|r| r.len() == cfg.gamma.n && r.members().iter().all(|m| case.truth.get(m) == Some(&Truth::Conforming)));
    let result = find_consistent_subset(case.initiator, &candidates, &obs, cfg)?;
    let oracle = exhaustive_consistent(case.initiator, &obs, cfg)?;
    Ok(OracleComparison { policy_view: result.selected_view, oracle, truthful_candidate })
}

/// Whether one run of candidate growth yields a receiver set made only of
/// the initiator and conforming identities. Liars report random values and
/// no Sybils are present, as the closed form assumes.
pub fn growth_finds_conforming_set(conforming: usize, lns: usize, n: usize, seed: u64) -> Result<bool> {
    let case = synthetic_case(&CaseParams { conforming, lying_nonsybil: lns, sybils: 0, lies: Lies::Random }, seed)?;
    let cfg = exact_config::<f64>(n, 1, mix(seed ^ 1));
    let builder = CandidateBuilder::new(case.initiator, &case.obs, &cfg)?;
    for c in builder {
        if !c.short && c.receiver_set.members().iter().all(|m| case.truth[m] == Truth::Conforming) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Closed-form and empirical probability of an all-conforming candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub conforming: usize,
    pub lying_nonsybil: usize,
    pub runs: usize,
    pub formula: f64,
    pub empirical: f64,
}

impl GrowthCheck {
    pub fn error(&self) -> f64 {
        (self.formula - self.empirical).abs()
    }
}

pub fn growth_check(conforming: usize, lns: usize, n: usize, runs: usize, seed: u64) -> Result<GrowthCheck> {
    let formula = conforming_probability(conforming, lns, n, &GammaConfig::<f64>::exact(n))?;
    let mut hits = 0usize;
    for k in 0..runs {
        if growth_finds_conforming_set(conforming, lns, n, mix(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)))? {
            hits += 1;
        }
    }
    Ok(GrowthCheck { conforming, lying_nonsybil: lns, runs, formula, empirical: hits as f64 / runs as f64 })
}

/// Settings of the `verify` suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    /// Largest scenario, initiator included.
    pub max_identities: usize,
    pub cases: usize,
    pub seed: u64,
    /// Growth runs per grid point of the closed-form check.
    pub growth_runs: usize,
    /// Largest accepted gap between closed form and frequency.
    pub growth_tolerance: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { max_identities: 10, cases: 200, seed: 0, growth_runs: 2000, growth_tolerance: 0.04 }
    }
}

/// One line of the suite report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Parameters of adversarial scenario `k` with at most `max` identities:
/// up to two liars, two or three Sybils, and at least three conforming
/// identities besides the initiator.
pub fn adversarial_params(k: usize, max: usize, seed: u64) -> CaseParams {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ (k as u64)));
    let lns = k % 3;
    let sybils = rng.random_range(2..=3);
    let least = 4 + lns + sybils;
    let total = rng.random_range(least..=max.max(least));
    let conforming = total - 1 - lns - sybils;
    let lies = [Lies::Random, Lies::HonestSybils, Lies::Omniscient][(k / 3) % 3];
    CaseParams { conforming, lying_nonsybil: lns, sybils, lies }
}

/// Scenario seed of case `k`.
pub fn case_seed(seed: u64, k: usize) -> u64 {
    mix(seed.wrapping_add((k as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03)))
}

/// Runs the three checks.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    if opts.max_identities < 7 || opts.max_identities > 16 {
        return Err(Error::Config("max identities must lie in 7..=16".into()));
    }
    let mut reports = Vec::new();

    let mut failures = 0;
    for k in 0..opts.cases {
        let p = adversarial_params(k, opts.max_identities, opts.seed);
        let case = synthetic_case(&p, case_seed(opts.seed, k))?;
        if !max_sybil_bound(&case, &SignalprintThresholds::<f64>::default(), 4)?.holds() {
            failures += 1;
        }
    }
    reports.push(CheckReport {
        check: "max-sybil-bound".into(),
        cases: opts.cases,
        failures,
        detail: "accepted Sybils <= non-Sybils classified Sybil".into(),
    });

    let (mut failures, mut untruthful) = (0, 0);
    for k in 0..opts.cases {
        let p = adversarial_params(k, opts.max_identities, opts.seed ^ 1);
        let case = synthetic_case(&p, case_seed(opts.seed ^ 1, k))?;
        let cfg = exact_config::<crate::Exact>(4, 3, case_seed(opts.seed ^ 2, k));
        let all = compare_with_oracle(&case, &cfg, Candidates::All)?;
        let grown = compare_with_oracle(&case, &cfg, Candidates::Grown)?;
        if !grown.truthful_candidate {
            untruthful += 1;
        }
        if !all.agrees() || (grown.truthful_candidate && !grown.agrees()) {
            failures += 1;
        }
    }
    reports.push(CheckReport {
        check: "consistency-vs-exhaustive".into(),
        cases: opts.cases,
        failures,
        detail: format!("selected view equals exhaustive search; {untruthful} cases grew no truthful candidate"),
    });

    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let grid = [(5, 0), (5, 4), (10, 2), (10, 10), (20, 6), (30, 10)];
    for (j, &(c, l)) in grid.iter().enumerate() {
        let g = growth_check(c, l, 4, opts.growth_runs, case_seed(opts.seed ^ 3, j))?;
        worst = worst.max(g.error());
        if g.error() > opts.growth_tolerance {
            failures += 1;
        }
    }
    reports.push(CheckReport {
        check: "growth-formula-vs-frequency".into(),
        cases: grid.len(),
        failures,
        detail: format!("largest gap {worst:.4} (tolerance {})", opts.growth_tolerance),
    });
    Ok(reports)
}
