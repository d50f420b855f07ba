//! The three-phase collection protocol, run as a discrete-event simulation
//! over a [`World`].
//!
//! Phase I discovers the identities in range, Phase II has each of them
//! transmit probes in a jointly randomized order while everyone records
//! RSSIs, and Phase III collects commitments to those records followed by
//! the records themselves. The initiator then classifies.

pub mod commit;
pub mod message;
pub mod motion;
pub mod schedule;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{fabricate_observations, mobile_attacker_step, AttackerKind, Fabrication, FabricationInput};
use crate::channel::{receive, AttenuationCache, NodeState, Role};
use crate::classification::{classify, ClassificationResult, ClassifierConfig, Policy};
use crate::error::{Error, Result};
use crate::ids::{IdentityId, NodeId};
use crate::signalprint::ObservationMatrix;
use crate::world::{Jamming, RevealBehavior, Truth, World};

pub use commit::{opens, ObservationLog};
pub use message::{Message, MessageKind};
pub use motion::{motion_filter, sample_std, MotionVerdict};
pub use schedule::{schedule_seed, ProbeSchedule};
pub use trace::{Phase, Trace, TraceKind, TraceLine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Probes per identity in Phase II.
    pub probes: usize,
    pub slot_ms: u64,
    /// Phase I ends after this many silent slots.
    pub idle_slots: u64,
    /// Phase I and Phase III give up after this long.
    pub timeout_ms: u64,
    /// A HELLO-II later than this after its TRANSMIT is not accepted.
    pub response_deadline_ms: f64,
    /// How long a radio already in place takes to answer.
    pub response_latency_ms: f64,
    /// Largest roster, initiator included.
    pub identity_cap: usize,
    /// Largest per-probe RSSI standard deviation the initiator accepts.
    pub motion_std: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            probes: 14,
            slot_ms: 12,
            idle_slots: 3,
            timeout_ms: 15_000,
            response_deadline_ms: 10.0,
            response_latency_ms: 1.0,
            identity_cap: 400,
            motion_std: 2.5,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.probes < 2 {
            return Err(Error::Config("at least two probes are needed for the motion filter".into()));
        }
        if self.slot_ms == 0 || self.identity_cap < 2 {
            return Err(Error::Config("slot_ms must be positive and identity_cap at least 2".into()));
        }
        if !(self.response_latency_ms >= 0.0 && self.response_deadline_ms >= 0.0 && self.motion_std > 0.0) {
            return Err(Error::Config("response times must be non-negative and motion_std positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortReason {
    JammingSuspected,
    TooManyIdentities,
}

/// Why an identity is rejected outright; rejected identities count as Sybil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Late,
    Moving,
    TooFewProbes,
}

/// Why an identity's reports are discarded. The identity itself is still
/// classified from what others heard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    Withheld,
    Mismatch,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub initiator: IdentityId,
    /// Identities admitted in Phase I, initiator included, sorted.
    pub roster: Vec<IdentityId>,
    pub abort: Option<AbortReason>,
    pub schedule: Option<ProbeSchedule>,
    /// Accepted reports over the roster minus rejected identities.
    pub observations: Option<ObservationMatrix<f64>>,
    pub rejected: BTreeMap<IdentityId, RejectReason>,
    pub dropped: BTreeMap<IdentityId, DropReason>,
    pub fabrication: Option<Fabrication>,
    pub trace: Trace,
    pub duration_ms: u64,
}

struct Mover {
    from: NodeState,
    target: NodeState,
    since_ms: f64,
}

fn id_bytes(ids: &[u32]) -> Vec<u8> {
    ids.iter().flat_map(|i| i.to_le_bytes()).collect()
}

struct Round<'w> {
    world: &'w World,
    cfg: &'w ProtocolConfig,
    rng: ChaCha8Rng,
    trace: Trace,
    t: u64,
}

impl Round<'_> {
    fn send(&mut self, kind: MessageKind, sender: IdentityId, payload: Vec<u8>) {
        self.trace.message(&Message::new(kind, sender, self.t, payload));
    }

    fn event(&mut self, kind: TraceKind, sender: IdentityId, detail: &str) {
        self.trace.event(self.t, kind, sender, detail);
    }

    fn tick(&mut self) {
        self.t += self.cfg.slot_ms;
    }

    /// Keeps retransmitting a jammed message until the timeout expires.
    fn jammed_until_timeout(&mut self, kind: MessageKind, victim: IdentityId, started: u64) {
        let deadline = started + self.cfg.timeout_ms;
        while self.t + self.cfg.slot_ms < deadline {
            self.tick();
            self.send(kind, victim, id_bytes(&[victim.0]));
        }
        self.t = deadline;
        self.event(TraceKind::Abort, self.world.initiator, "jamming-suspected");
    }
}

/// Runs Phases I through III. All randomness is drawn from `seed`.
pub fn run_round(world: &World, cfg: &ProtocolConfig, seed: u64) -> Result<RoundOutcome> {
    cfg.validate()?;
    world.channel.validate()?;
    let i0 = world.initiator;
    let mut r = Round { world, cfg, rng: ChaCha8Rng::seed_from_u64(seed), trace: Trace::default(), t: 0 };
    let mut out = RoundOutcome {
        initiator: i0,
        roster: vec![i0],
        abort: None,
        schedule: None,
        observations: None,
        rejected: BTreeMap::new(),
        dropped: BTreeMap::new(),
        fabrication: None,
        trace: Trace::default(),
        duration_ms: 0,
    };
    let finish = |mut out: RoundOutcome, r: Round<'_>| {
        out.duration_ms = r.t;
        out.trace = r.trace;
        Ok(out)
    };

    // Phase I: discovery.
    r.event(TraceKind::Begin(Phase::Discovery), i0, "");
    r.send(MessageKind::Request, i0, vec![]);
    let jammed_hello = match world.jamming {
        Some(Jamming::Hello { victim }) => Some(IdentityId(victim)),
        _ => None,
    };
    let mut pending = None;
    for id in world.ids().into_iter().filter(|&x| x != i0) {
        r.tick();
        r.send(MessageKind::HelloI, id, id_bytes(&[id.0]));
        if Some(id) == jammed_hello {
            pending = Some(id);
            continue;
        }
        out.roster.push(id);
        if out.roster.len() > cfg.identity_cap {
            out.abort = Some(AbortReason::TooManyIdentities);
            r.event(TraceKind::Abort, i0, "too-many-identities");
            return finish(out, r);
        }
        r.send(MessageKind::Ack, i0, id_bytes(&[id.0]));
    }
    if let Some(victim) = pending {
        r.jammed_until_timeout(MessageKind::HelloI, victim, 0);
        out.abort = Some(AbortReason::JammingSuspected);
        return finish(out, r);
    }
    r.t += cfg.idle_slots * cfg.slot_ms;
    out.roster.sort_unstable();

    // Phase II: randomized probing.
    r.event(TraceKind::Begin(Phase::Probing), i0, "");
    let mut contributions = Vec::with_capacity(out.roster.len());
    for &id in &out.roster {
        r.tick();
        let value: [u8; 32] = r.rng.random();
        let mut payload = id_bytes(&[id.0]);
        payload.extend_from_slice(&value);
        r.send(MessageKind::RandContrib, id, payload);
        contributions.push((id, value));
    }
    let schedule = ProbeSchedule::build(&contributions, cfg.probes)?;
    let logs = probe_phase(&mut r, &out.roster, &schedule, &mut out.rejected)?;
    out.schedule = Some(schedule);

    let initiator_log = &logs[&i0];
    for &x in out.roster.iter().filter(|&&x| x != i0) {
        if out.rejected.contains_key(&x) {
            continue;
        }
        let series: Vec<Option<f64>> = (0..cfg.probes).map(|p| initiator_log.entries.get(&(x, p)).copied()).collect();
        let reason = match motion_filter(&series, cfg.motion_std) {
            MotionVerdict::Stationary { .. } => continue,
            MotionVerdict::Moving { .. } => RejectReason::Moving,
            MotionVerdict::TooFewProbes => RejectReason::TooFewProbes,
        };
        out.rejected.insert(x, reason);
        r.event(TraceKind::Reject, x, reason_name(reason));
    }

    // Phase III: commit, then reveal.
    r.event(TraceKind::Begin(Phase::Reporting), i0, "");
    let phase3_start = r.t;
    let (reported, fabrication) = reported_logs(&mut r, &out.roster, &logs);
    out.fabrication = fabrication;
    let jammed_reports = match world.jamming {
        Some(Jamming::Reports { victim }) => Some(IdentityId(victim)).filter(|v| out.roster.contains(v)),
        _ => None,
    };
    let mut commitments = BTreeMap::new();
    for &id in &out.roster {
        r.tick();
        let c = reported[&id].commitment()?;
        r.send(MessageKind::Commit, id, c.to_vec());
        if Some(id) != jammed_reports {
            commitments.insert(id, c);
        }
    }
    if let Some(victim) = jammed_reports {
        r.jammed_until_timeout(MessageKind::Commit, victim, phase3_start);
        out.abort = Some(AbortReason::JammingSuspected);
        return finish(out, r);
    }
    let mut revealed = BTreeMap::new();
    for &id in &out.roster {
        let behavior = if world.lies(id) { world.reveal } else { RevealBehavior::Honest };
        let log = &reported[&id];
        let bytes = match behavior {
            RevealBehavior::Withhold => None,
            RevealBehavior::Honest => Some(log.canonical_bytes()?),
            RevealBehavior::Mismatch => {
                let mut tampered = log.clone();
                match tampered.entries.values_mut().next() {
                    Some(v) => *v += 1.0,
                    None => tampered.record(id, 0, -50.0),
                }
                Some(tampered.canonical_bytes()?)
            }
        };
        let Some(bytes) = bytes else {
            out.dropped.insert(id, DropReason::Withheld);
            continue;
        };
        r.tick();
        r.send(MessageKind::Reveal, id, bytes.clone());
        if opens(&commitments[&id], &bytes) {
            revealed.insert(id, ObservationLog::parse(&bytes)?);
        } else {
            out.dropped.insert(id, DropReason::Mismatch);
        }
    }
    r.tick();
    for (&id, &why) in &out.dropped {
        r.event(TraceKind::Drop, id, drop_name(why));
    }

    let admitted: Vec<IdentityId> = out.roster.iter().copied().filter(|x| !out.rejected.contains_key(x)).collect();
    let mut obs = ObservationMatrix::new(admitted.iter().copied(), cfg.probes)?;
    for (&y, log) in &revealed {
        if obs.index_of(y).is_none() {
            continue;
        }
        for (&(tx, p), &v) in &log.entries {
            if tx != y && p < cfg.probes && obs.index_of(tx).is_some() {
                obs.set(y, tx, p, Some(v))?;
            }
        }
    }
    out.observations = Some(obs);
    r.event(TraceKind::Done, i0, "");
    finish(out, r)
}

fn reason_name(r: RejectReason) -> &'static str {
    match r {
        RejectReason::Late => "late",
        RejectReason::Moving => "moving",
        RejectReason::TooFewProbes => "too-few-probes",
    }
}

fn drop_name(d: DropReason) -> &'static str {
    match d {
        DropReason::Withheld => "withheld",
        DropReason::Mismatch => "mismatch",
    }
}

fn is_mobile(world: &World, node: NodeId) -> bool {
    world.attacker.kind == AttackerKind::Mobile && world.nodes[node.0 as usize].role == Role::SybilAttacker
}

/// Phase II proper: walks the schedule and records what every radio hears.
fn probe_phase(
    r: &mut Round<'_>,
    roster: &[IdentityId],
    schedule: &ProbeSchedule,
    rejected: &mut BTreeMap<IdentityId, RejectReason>,
) -> Result<BTreeMap<IdentityId, ObservationLog>> {
    let world = r.world;
    let cfg = r.cfg;
    let i0 = world.initiator;
    let mut cache = AttenuationCache::new(world.seed);
    let mut logs: BTreeMap<IdentityId, ObservationLog> = roster.iter().map(|&y| (y, ObservationLog::new(y))).collect();
    let mut listeners: BTreeMap<NodeId, Vec<IdentityId>> = BTreeMap::new();
    for &y in roster {
        listeners.entry(world.identity(y).expect("roster is drawn from the world").node).or_default().push(y);
    }
    let mut movers: BTreeMap<NodeId, Mover> = BTreeMap::new();
    let mut sent = BTreeMap::<IdentityId, usize>::new();
    let mut late = BTreeSet::new();

    for &x in &schedule.order {
        r.tick();
        let probe = {
            let c = sent.entry(x).or_insert(0);
            *c += 1;
            *c - 1
        };
        r.send(MessageKind::Transmit, i0, id_bytes(&[x.0, probe as u32]));
        let ident = world.identity(x).expect("roster is drawn from the world");
        let node = &world.nodes[ident.node.0 as usize];
        let now = r.t as f64;
        let mut delay = cfg.response_latency_ms;
        let tx_state = if is_mobile(world, node.id) {
            let latency = world.attacker.switch_latency_ms;
            let target = ident.home.unwrap_or_else(|| node.state());
            let m = movers.entry(node.id).or_insert(Mover { from: target, target, since_ms: now });
            if m.target != target {
                let here = mobile_attacker_step(&m.from, &m.target, now - m.since_ms, latency);
                *m = Mover { from: here, target, since_ms: now };
            }
            if world.attacker.wait_for_arrival {
                delay = delay.max(latency - (now - m.since_ms));
            }
            mobile_attacker_step(&m.from, &m.target, now + delay - m.since_ms, latency)
        } else {
            node.state_at(now + delay, &mut r.rng)
        };
        if delay > cfg.response_deadline_ms {
            late.insert(x);
            continue;
        }
        let t_resp = r.t + delay.ceil() as u64;
        r.trace.message(&Message::new(MessageKind::HelloII, x, t_resp, id_bytes(&[x.0, probe as u32])));
        let t_resp = t_resp as f64;
        for (&rx_id, ids) in &listeners {
            if rx_id == node.id {
                continue;
            }
            let rx = &world.nodes[rx_id.0 as usize];
            let rx_state = match movers.get(&rx_id) {
                Some(m) => mobile_attacker_step(&m.from, &m.target, t_resp - m.since_ms, world.attacker.switch_latency_ms),
                None => rx.state_at(t_resp, &mut r.rng),
            };
            let heard = receive(&tx_state, &rx_state, rx.rx_offset, ident.tx_power, &world.channel, &mut cache, &mut r.rng)?;
            if let Some(v) = heard {
                for &y in ids {
                    logs.get_mut(&y).expect("listener is on the roster").record(x, probe, v);
                }
            }
        }
    }
    // The last response window closes one slot after its TRANSMIT.
    r.tick();
    for x in late {
        if x != i0 {
            rejected.insert(x, RejectReason::Late);
            r.event(TraceKind::Reject, x, reason_name(RejectReason::Late));
        }
    }
    Ok(logs)
}

/// What each identity claims to have heard: the truth for conforming
/// identities, fabrications for everyone else.
fn reported_logs(
    r: &mut Round<'_>,
    roster: &[IdentityId],
    logs: &BTreeMap<IdentityId, ObservationLog>,
) -> (BTreeMap<IdentityId, ObservationLog>, Option<Fabrication>) {
    let world = r.world;
    let i0 = world.initiator;
    let truths = world.truths();
    let mobile = world.attacker.kind == AttackerKind::Mobile;
    let attacker: Vec<IdentityId> = roster
        .iter()
        .copied()
        .filter(|&x| x != i0 && world.lies(x) && !(mobile && truths[&x] == Truth::Sybil))
        .collect();
    let mut reported = logs.clone();
    if attacker.is_empty() {
        return (reported, None);
    }
    let mut sums: BTreeMap<IdentityId, (f64, usize)> = BTreeMap::new();
    for (&(tx, _), &v) in &logs[&i0].entries {
        let e = sums.entry(tx).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    let initiator_truth: BTreeMap<IdentityId, f64> = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let sybils: Vec<IdentityId> = roster.iter().copied().filter(|x| truths[x] == Truth::Sybil).collect();
    let targets: Vec<IdentityId> = roster.iter().copied().filter(|&x| x != i0 && truths[&x] == Truth::Conforming).collect();
    let input = FabricationInput {
        initiator: i0,
        attacker: &attacker,
        sybils: &sybils,
        targets: &targets,
        universe: roster,
        initiator_truth: &initiator_truth,
        step: world.channel.quantization,
    };
    let fab = fabricate_observations(&world.attacker, &input, &mut r.rng);
    for &a in &attacker {
        reported.insert(a, ObservationLog::new(a));
    }
    for (&(a, tx), &v) in &fab.reports {
        let log = reported.get_mut(&a).expect("fabricated for an attacker identity");
        for p in 0..r.cfg.probes {
            log.record(tx, p, v);
        }
    }
    (reported, Some(fab))
}

/// Holds classification back until the initiator has moved enough since
/// the last one. The first round is always classified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationGate {
    /// Peak acceleration, m/s², that makes a new classification worthwhile.
    pub threshold: f64,
    classified: bool,
    peak_since: f64,
}

impl Default for ClassificationGate {
    fn default() -> Self {
        Self::new(2.0)
    }
}

impl ClassificationGate {
    pub fn new(threshold: f64) -> Self {
        Self { threshold, classified: false, peak_since: 0.0 }
    }

    pub fn observe_acceleration(&mut self, a: f64) {
        self.peak_since = self.peak_since.max(a.abs());
    }

    pub fn ready(&self) -> bool {
        !self.classified || self.peak_since >= self.threshold
    }

    fn mark(&mut self) {
        self.classified = true;
        self.peak_since = 0.0;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoundDecision {
    Classified(ClassificationResult),
    Deferred,
    Aborted(AbortReason),
}

/// Classifies a finished round, adding identities rejected by the protocol
/// to the selected view.
pub fn classify_round(
    gate: &mut ClassificationGate,
    outcome: &RoundOutcome,
    cfg: &ClassifierConfig<f64>,
    policy: Policy,
) -> Result<RoundDecision> {
    if let Some(a) = outcome.abort {
        return Ok(RoundDecision::Aborted(a));
    }
    if !gate.ready() {
        return Ok(RoundDecision::Deferred);
    }
    let obs = outcome.observations.as_ref().ok_or_else(|| Error::Config("round has no observations".into()))?;
    let mut result = classify(outcome.initiator, obs, cfg, policy)?;
    result.selected_view.rejected.extend(outcome.rejected.keys().copied());
    gate.mark();
    Ok(RoundDecision::Classified(result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModel, Mobility, PhysicalNode};
    use crate::world::Identity;

    fn honest_world(n: u32) -> World {
        let nodes: Vec<PhysicalNode> = (0..n)
            .map(|k| PhysicalNode::stationary(NodeId(k), [(k % 4) as f64 * 3.0 + 1.0, (k / 4) as f64 * 3.0 + 1.0], Role::Conforming))
            .collect();
        let ids = (0..n).map(|k| Identity { id: IdentityId(k), node: NodeId(k), tx_power: 10.0, home: None }).collect();
        World::new(nodes, ids, ChannelModel::default(), IdentityId(0), 7).unwrap()
    }

    #[test]
    fn honest_round_completes_with_full_reports() {
        let w = honest_world(6);
        let cfg = ProtocolConfig::default();
        let out = run_round(&w, &cfg, 1).unwrap();
        assert!(out.abort.is_none());
        assert!(out.rejected.is_empty() && out.dropped.is_empty());
        out.trace.validate().unwrap();
        assert_eq!(out.trace.count(TraceKind::Message(MessageKind::HelloII)), 6 * 14);
        let obs = out.observations.unwrap();
        assert_eq!(obs.len(), 6);
        assert!(obs.get(IdentityId(1), IdentityId(2), 13).is_some());
        assert!(obs.get(IdentityId(1), IdentityId(1), 0).is_none());
    }

    #[test]
    fn rounds_are_deterministic() {
        let w = honest_world(5);
        let cfg = ProtocolConfig::default();
        let a = run_round(&w, &cfg, 3).unwrap();
        let b = run_round(&w, &cfg, 3).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_ne!(a.trace, run_round(&w, &cfg, 4).unwrap().trace);
    }

    #[test]
    fn jammed_discovery_aborts_at_timeout() {
        let mut w = honest_world(4);
        w.jamming = Some(Jamming::Hello { victim: 2 });
        let out = run_round(&w, &ProtocolConfig::default(), 1).unwrap();
        assert_eq!(out.abort, Some(AbortReason::JammingSuspected));
        assert_eq!(out.duration_ms, 15_000);
        out.trace.validate().unwrap();
    }

    #[test]
    fn jammed_reports_abort() {
        let mut w = honest_world(4);
        w.jamming = Some(Jamming::Reports { victim: 3 });
        let out = run_round(&w, &ProtocolConfig::default(), 1).unwrap();
        assert_eq!(out.abort, Some(AbortReason::JammingSuspected));
        out.trace.validate().unwrap();
    }

    #[test]
    fn roster_cap_aborts() {
        let w = honest_world(6);
        let cfg = ProtocolConfig { identity_cap: 5, ..Default::default() };
        let out = run_round(&w, &cfg, 1).unwrap();
        assert_eq!(out.abort, Some(AbortReason::TooManyIdentities));
        let cfg = ProtocolConfig { identity_cap: 6, ..Default::default() };
        assert!(run_round(&w, &cfg, 1).unwrap().abort.is_none());
    }

    #[test]
    fn bad_reveals_drop_rows() {
        for (behavior, reason) in [(RevealBehavior::Mismatch, DropReason::Mismatch), (RevealBehavior::Withhold, DropReason::Withheld)] {
            let mut w = honest_world(5);
            w.nodes[4].role = Role::LyingNonsybil;
            w.reveal = behavior;
            let out = run_round(&w, &ProtocolConfig::default(), 2).unwrap();
            assert_eq!(out.dropped.get(&IdentityId(4)), Some(&reason));
            let obs = out.observations.unwrap();
            assert!(obs.mean(IdentityId(4), IdentityId(1)).is_none());
            assert!(obs.mean(IdentityId(1), IdentityId(4)).is_some());
        }
    }

    #[test]
    fn moving_node_is_rejected() {
        let mut w = honest_world(5);
        w.nodes[3].mobility = Mobility::Jitter { amplitude: 3.0 };
        let out = run_round(&w, &ProtocolConfig::default(), 5).unwrap();
        assert_eq!(out.rejected.get(&IdentityId(3)), Some(&RejectReason::Moving));
        assert!(out.observations.unwrap().index_of(IdentityId(3)).is_none());
    }

    #[test]
    fn slow_mobile_attacker_waiting_to_arrive_is_late() {
        let mut w = honest_world(4);
        w.nodes[3].role = Role::SybilAttacker;
        let base = w.nodes[3].state();
        for k in 0..3u32 {
            let mut home = base;
            home.position[0] += 0.5 * k as f64;
            w.identities.push(Identity { id: IdentityId(10 + k), node: NodeId(3), tx_power: 10.0, home: Some(home) });
        }
        w.identities.retain(|i| i.id != IdentityId(3));
        w.attacker.kind = AttackerKind::Mobile;
        w.attacker.switch_latency_ms = 500.0;
        w.attacker.wait_for_arrival = true;
        let out = run_round(&w, &ProtocolConfig::default(), 1).unwrap();
        let late: Vec<_> = out.rejected.iter().filter(|(_, r)| **r == RejectReason::Late).map(|(k, _)| *k).collect();
        assert!(!late.is_empty());
        assert!(late.iter().all(|x| x.0 >= 10));
    }

    #[test]
    fn gate_defers_until_the_initiator_moves() {
        let w = honest_world(5);
        let out = run_round(&w, &ProtocolConfig::default(), 1).unwrap();
        let cfg = ClassifierConfig::default();
        let mut gate = ClassificationGate::default();
        assert!(matches!(classify_round(&mut gate, &out, &cfg, Policy::Consistency).unwrap(), RoundDecision::Classified(_)));
        assert_eq!(classify_round(&mut gate, &out, &cfg, Policy::Consistency).unwrap(), RoundDecision::Deferred);
        gate.observe_acceleration(1.9);
        assert!(!gate.ready());
        gate.observe_acceleration(2.0);
        assert!(matches!(classify_round(&mut gate, &out, &cfg, Policy::Consistency).unwrap(), RoundDecision::Classified(_)));
    }
}
