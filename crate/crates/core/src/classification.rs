//! View selection when observers may lie.
//!
//! Candidate receiver sets are grown from every pair `{initiator, i}`
//! ([`CandidateBuilder`]). One of two policies then picks a view: the one
//! claiming the most Sybils ([`max_sybil_select`]), or the one whose
//! non-Sybil set needs the fewest exclusions to be consistent
//! ([`find_consistent_subset`]).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::IdentityId;
use crate::scalar::Scalar;
use crate::signalprint::{generate_view, generate_view_with_clusters, ObservationMatrix, ReceiverSet, SignalprintThresholds, View};

/// Misclassification tolerances per receiver-set size.
///
/// `gamma4` is used for every size of 4 and above. A value of zero demands
/// exact agreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig<S> {
    pub gamma2: S,
    pub gamma3: S,
    pub gamma4: S,
    /// Receiver set size.
    pub n: usize,
}

impl<S: Scalar> Default for GammaConfig<S> {
    fn default() -> Self {
        Self {
            gamma2: S::from_f64_lossy(0.4),
            gamma3: S::from_f64_lossy(0.2),
            gamma4: S::from_f64_lossy(0.05),
            n: 4,
        }
    }
}

impl<S: Scalar> GammaConfig<S> {
    /// Every tolerance zero: views must agree exactly.
    pub fn exact(n: usize) -> Self {
        Self { gamma2: S::zero(), gamma3: S::zero(), gamma4: S::zero(), n }
    }

    pub fn for_size(&self, m: usize) -> S {
        match m {
            0..=2 => self.gamma2,
            3 => self.gamma3,
            _ => self.gamma4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let half = S::one() / (S::one() + S::one());
        for (name, g) in [("gamma2", self.gamma2), ("gamma3", self.gamma3), ("gamma4", self.gamma4)] {
            if g < S::zero() || !(g < half) {
                return Err(Error::Config(format!("{name} must lie in [0, 0.5)")));
            }
        }
        if self.n < 2 {
            return Err(Error::Config("receiver set size n must be at least 2".into()));
        }
        Ok(())
    }
}

/// `inter / diff > (1 − 2γ) / γ`, cross-multiplied; an empty difference
/// always passes.
fn ratio_exceeds<S: Scalar>(inter: usize, diff: usize, gamma: S) -> bool {
    if diff == 0 {
        return true;
    }
    let two = S::one() + S::one();
    S::from_count(inter) * gamma > (S::one() - two * gamma) * S::from_count(diff)
}

/// Whether two views agree on their non-Sybil sets up to tolerance `gamma`.
pub fn gamma_similar_with<S: Scalar>(v1: &View, v2: &View, gamma: S) -> bool {
    let inter = v1.nonsybil.intersection(&v2.nonsybil).count();
    let only1 = v1.nonsybil.len() - inter;
    let only2 = v2.nonsybil.len() - inter;
    ratio_exceeds(inter, only1, gamma) && ratio_exceeds(inter, only2, gamma)
}

/// [`gamma_similar_with`] at the tolerance for size `g.n`.
pub fn gamma_similar<S: Scalar>(v1: &View, v2: &View, g: &GammaConfig<S>) -> bool {
    gamma_similar_with(v1, v2, g.for_size(g.n))
}

/// Probability that growing each of the `c` conforming pairs yields at
/// least one all-conforming size-`n` receiver set, when `lns` liars are
/// present.
pub fn conforming_probability<S: Scalar>(c: usize, lns: usize, n: usize, g: &GammaConfig<S>) -> Result<f64> {
    if c + 1 < n {
        return Err(Error::Domain(format!("need at least n-1 = {} conforming identities, got {c}", n.saturating_sub(1))));
    }
    let cf = c as f64;
    let mut p = 1.0;
    for m in 2..n {
        let gm = g.for_size(m).to_f64_lossy();
        let num = (1.0 - gm) * cf - (m as f64 - 1.0);
        if num <= 0.0 {
            return Err(Error::Domain(format!("growth step {m} has no conforming candidates left")));
        }
        p *= num / (lns as f64 + num);
    }
    // 1 − (1 − p)^c without cancellation near 1.
    let q = -(cf * (-p).ln_1p()).exp_m1();
    Ok(q.clamp(0.0, 1.0))
}

/// Parameters shared by both selection policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig<S> {
    pub thresholds: SignalprintThresholds<S>,
    pub gamma: GammaConfig<S>,
    /// Growth-phase thresholds are the table values times this factor.
    pub looseness: S,
    /// Candidate sets built per identity.
    pub multiplier: usize,
    /// Largest RSSI-ratio disagreement still counted as a match; defaults to
    /// the dimension-2 distance threshold.
    pub ratio_tolerance: Option<S>,
    pub seed: u64,
}

impl<S: Scalar> Default for ClassifierConfig<S> {
    fn default() -> Self {
        Self {
            thresholds: SignalprintThresholds::default(),
            gamma: GammaConfig::default(),
            looseness: S::from_count(2),
            multiplier: 1,
            ratio_tolerance: None,
            seed: 0,
        }
    }
}

impl<S: Scalar> ClassifierConfig<S> {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.gamma.validate()?;
        if !(self.looseness > S::zero()) {
            return Err(Error::Config("looseness must be positive".into()));
        }
        if self.multiplier == 0 {
            return Err(Error::Config("candidate multiplier must be at least 1".into()));
        }
        Ok(())
    }

    fn tolerance(&self) -> S {
        self.ratio_tolerance.unwrap_or(self.thresholds.dim2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    MaxSybil,
    Consistency,
}

/// One grown receiver set.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub receiver_set: ReceiverSet,
    /// Growth stopped early because no non-Sybil identity was left to add.
    pub short: bool,
}

/// Grows candidate receiver sets one at a time, in a fixed order: every
/// identity in order, repeated `multiplier` times.
pub struct CandidateBuilder<'a, S> {
    initiator: IdentityId,
    seeds: Vec<IdentityId>,
    obs: &'a ObservationMatrix<S>,
    loose: SignalprintThresholds<S>,
    n: usize,
    rounds: usize,
    next: usize,
    rng: ChaCha8Rng,
}

impl<'a, S: Scalar> CandidateBuilder<'a, S> {
    /// Candidates over every identity of `obs` other than the initiator.
    pub fn new(initiator: IdentityId, obs: &'a ObservationMatrix<S>, cfg: &ClassifierConfig<S>) -> Result<Self> {
        let all: Vec<IdentityId> = obs.identities().iter().copied().filter(|i| *i != initiator).collect();
        Self::over(initiator, &all, obs, cfg)
    }

    /// Candidates seeded from `all` only.
    pub fn over(initiator: IdentityId, all: &[IdentityId], obs: &'a ObservationMatrix<S>, cfg: &ClassifierConfig<S>) -> Result<Self> {
        cfg.validate()?;
        if obs.index_of(initiator).is_none() {
            return Err(Error::UnknownIdentity(initiator));
        }
        let mut seeds: Vec<IdentityId> = all.iter().copied().filter(|i| *i != initiator).collect();
        seeds.sort_unstable();
        seeds.dedup();
        if let Some(bad) = seeds.iter().find(|i| obs.index_of(**i).is_none()) {
            return Err(Error::UnknownIdentity(*bad));
        }
        Ok(Self {
            initiator,
            seeds,
            obs,
            loose: cfg.thresholds.scaled(cfg.looseness),
            n: cfg.gamma.n,
            rounds: cfg.multiplier,
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    pub fn total(&self) -> usize {
        self.seeds.len() * self.rounds
    }
}

impl<S: Scalar> Iterator for CandidateBuilder<'_, S> {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        if self.next >= self.total() {
            return None;
        }
        let i = self.seeds[self.next % self.seeds.len()];
        self.next += 1;
        let mut r = ReceiverSet::pair(self.initiator, i).expect("initiator is not a seed");
        let mut short = false;
        while r.len() < self.n {
            let view = generate_view(&r, self.obs, &self.loose);
            let pool: Vec<IdentityId> = view.nonsybil.iter().copied().filter(|x| !r.contains(*x)).collect();
            if pool.is_empty() {
                short = true;
                break;
            }
            let pick = pool[self.rng.random_range(0..pool.len())];
            r = r.extended(pick).expect("pool excludes members");
        }
        Some(Candidate { receiver_set: r, short })
    }
}

/// All candidate sets, plus any size-2 views already computed for them.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    /// `V({initiator, i})` at the table thresholds, keyed by `i`.
    pub pair_views: BTreeMap<IdentityId, View>,
}

impl CandidateSet {
    pub fn receiver_sets(&self) -> impl Iterator<Item = &ReceiverSet> {
        self.candidates.iter().map(|c| &c.receiver_set)
    }
}

/// Builds every candidate receiver set, and the size-2 views used later by
/// [`find_consistent_subset`].
pub fn build_receiver_sets<S: Scalar>(
    initiator: IdentityId,
    all: &[IdentityId],
    obs: &ObservationMatrix<S>,
    cfg: &ClassifierConfig<S>,
) -> Result<CandidateSet> {
    let builder = CandidateBuilder::over(initiator, all, obs, cfg)?;
    let seeds = builder.seeds.clone();
    let candidates: Vec<Candidate> = builder.collect();
    let pair_views = seeds
        .iter()
        .map(|i| (*i, generate_view(&ReceiverSet::pair(initiator, *i).expect("distinct"), obs, &cfg.thresholds)))
        .collect();
    Ok(CandidateSet { candidates, pair_views })
}

/// Outcome of one classification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationResult {
    /// The chosen view; excluded identities are moved to its `rejected` set.
    pub selected_view: View,
    pub receiver_set: ReceiverSet,
    pub excluded: BTreeSet<IdentityId>,
    pub policy: Policy,
    pub early_exit: bool,
    /// Candidates actually evaluated.
    pub evaluated: usize,
}

/// The view claiming the most Sybil identities (rejected ones included)
/// among `sets`; ties go to the earliest set.
pub fn max_sybil_over<'r, S: Scalar>(
    sets: impl IntoIterator<Item = &'r ReceiverSet>,
    obs: &ObservationMatrix<S>,
    t: &SignalprintThresholds<S>,
) -> Option<ClassificationResult> {
    let mut best: Option<(View, &ReceiverSet)> = None;
    let mut evaluated = 0;
    for r in sets {
        evaluated += 1;
        let v = generate_view(r, obs, t);
        if best.as_ref().is_none_or(|(b, _)| v.claimed_sybil() > b.claimed_sybil()) {
            best = Some((v, r));
        }
    }
    best.map(|(v, r)| ClassificationResult {
        selected_view: v,
        receiver_set: r.clone(),
        excluded: BTreeSet::new(),
        policy: Policy::MaxSybil,
        early_exit: false,
        evaluated,
    })
}

/// Max-Sybil policy over the grown candidates.
pub fn max_sybil_select<S: Scalar>(
    candidates: &CandidateSet,
    obs: &ObservationMatrix<S>,
    t: &SignalprintThresholds<S>,
) -> Result<ClassificationResult> {
    max_sybil_over(candidates.receiver_sets(), obs, t)
        .ok_or_else(|| Error::InvalidReceiverSet("no candidate receiver sets".into()))
}

/// Evaluates candidates for the consistency policy, caching size-2 views.
struct ConsistencyEvaluator<'a, S> {
    obs: &'a ObservationMatrix<S>,
    cfg: &'a ClassifierConfig<S>,
    initiator: IdentityId,
    pair_views: BTreeMap<IdentityId, View>,
}

impl<'a, S: Scalar> ConsistencyEvaluator<'a, S> {
    fn pair_view(&mut self, i: IdentityId) -> &View {
        let (obs, t, i0) = (self.obs, &self.cfg.thresholds, self.initiator);
        self.pair_views
            .entry(i)
            .or_insert_with(|| generate_view(&ReceiverSet::pair(i0, i).expect("distinct"), obs, t))
    }

    /// `V(r)` and the identities that must be excluded for it to be
    /// consistent.
    fn evaluate(&mut self, r: &ReceiverSet) -> (View, BTreeSet<IdentityId>) {
        let obs = self.obs;
        let (view, clusters) = generate_view_with_clusters(r, obs, &self.cfg.thresholds);
        let members: Vec<usize> = r.members().iter().filter_map(|m| obs.index_of(*m)).collect();

        // RSSI offset of each Sybil against its group's lowest identity, as
        // averaged over the receiver set.
        let mut ratios: Vec<(usize, usize, S)> = Vec::new();
        for group in &clusters {
            let sib = obs.index_of(group[0]).expect("view identities come from obs");
            for x in &group[1..] {
                let x = obs.index_of(*x).expect("view identities come from obs");
                let mut sum = S::zero();
                let mut count = 0usize;
                for &m in &members {
                    if let (Some(a), Some(b)) = (obs.mean_at(m, x), obs.mean_at(m, sib)) {
                        sum = sum + (a - b);
                        count += 1;
                    }
                }
                if count > 0 {
                    ratios.push((x, sib, sum / S::from_count(count)));
                }
            }
        }

        let tol = self.cfg.tolerance();
        let gamma_n = self.cfg.gamma.for_size(r.len());
        let gamma_2 = self.cfg.gamma.gamma2;
        let ns = view.nonsybil.len();
        let mut excluded = BTreeSet::new();
        let candidates: Vec<IdentityId> = view.nonsybil.iter().copied().filter(|i| *i != self.initiator).collect();
        for i in candidates {
            let ii = obs.index_of(i).expect("view identities come from obs");
            let mismatches = ratios
                .iter()
                .filter(|(x, sib, d)| match (obs.mean_at(ii, *x), obs.mean_at(ii, *sib)) {
                    (Some(a), Some(b)) => ((a - b) - *d).abs() > tol,
                    _ => false,
                })
                .count();
            // (|NS| + k) / k < (1 − 2γ) / γ, cross-multiplied.
            let two = S::one() + S::one();
            let too_many = mismatches > 0
                && S::from_count(ns + mismatches) * gamma_n < (S::one() - two * gamma_n) * S::from_count(mismatches);
            if too_many || !gamma_similar_with(&view, self.pair_view(i), gamma_2) {
                excluded.insert(i);
            }
        }
        (view, excluded)
    }
}

/// Consistency policy over an already-built candidate list.
pub fn find_consistent_subset<S: Scalar>(
    initiator: IdentityId,
    candidates: &CandidateSet,
    obs: &ObservationMatrix<S>,
    cfg: &ClassifierConfig<S>,
) -> Result<ClassificationResult> {
    let mut eval = ConsistencyEvaluator { obs, cfg, initiator, pair_views: candidates.pair_views.clone() };
    select_consistent(&mut eval, candidates.candidates.iter().cloned())
}

/// Fewest exclusions wins. A short candidate ranks behind every full-size
/// one: its tiny non-Sybil set needs few exclusions without being
/// consistent in any useful sense.
fn select_consistent<S: Scalar>(
    eval: &mut ConsistencyEvaluator<'_, S>,
    candidates: impl IntoIterator<Item = Candidate>,
) -> Result<ClassificationResult> {
    let mut best: Option<(bool, View, ReceiverSet, BTreeSet<IdentityId>)> = None;
    let mut evaluated = 0;
    for c in candidates {
        evaluated += 1;
        let (view, excluded) = eval.evaluate(&c.receiver_set);
        let done = !c.short && excluded.is_empty();
        if best.as_ref().is_none_or(|(short, _, _, e)| (c.short, excluded.len()) < (*short, e.len())) {
            best = Some((c.short, view, c.receiver_set, excluded));
        }
        if done {
            break;
        }
    }
    let (short, view, r, excluded) = best.ok_or_else(|| Error::InvalidReceiverSet("no candidate receiver sets".into()))?;
    Ok(ClassificationResult {
        selected_view: view.with_rejected(excluded.iter().copied()),
        receiver_set: r,
        early_exit: !short && excluded.is_empty(),
        excluded,
        policy: Policy::Consistency,
        evaluated,
    })
}

/// Runs candidate growth and the chosen policy. Under the consistency
/// policy candidates are grown lazily, so an early exit skips the rest.
pub fn classify<S: Scalar>(
    initiator: IdentityId,
    obs: &ObservationMatrix<S>,
    cfg: &ClassifierConfig<S>,
    policy: Policy,
) -> Result<ClassificationResult> {
    let builder = CandidateBuilder::new(initiator, obs, cfg)?;
    if builder.total() == 0 {
        return Err(Error::InvalidReceiverSet("no identities besides the initiator".into()));
    }
    match policy {
        Policy::MaxSybil => {
            let sets: Vec<ReceiverSet> = builder.map(|c| c.receiver_set).collect();
            max_sybil_over(sets.iter(), obs, &cfg.thresholds)
                .ok_or_else(|| Error::InvalidReceiverSet("no candidate receiver sets".into()))
        }
        Policy::Consistency => {
            let mut eval = ConsistencyEvaluator { obs, cfg, initiator, pair_views: BTreeMap::new() };
            select_consistent(&mut eval, builder)
        }
    }
}
