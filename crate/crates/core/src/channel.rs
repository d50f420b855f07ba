//! Ground-truth radio world: log-distance path loss, spatially keyed
//! log-normal shadowing, per-probe measurement noise and RSSI quantization.
//!
//! Shadowing is drawn per pair of coherence cells. A cell is a square of
//! side `coherence_length` combined with an orientation bin, so moving a
//! transmitter further than the coherence length (or turning it past an
//! orientation bin) yields an independent draw, while staying inside one
//! cell reproduces the same attenuation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::NodeId;

/// A received signal strength in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Rssi(f64);

impl Rssi {
    pub fn new(dbm: f64, m: &ChannelModel) -> Result<Self> {
        if !dbm.is_finite() || dbm < m.rssi_floor || dbm > m.rssi_ceiling {
            return Err(Error::Domain(format!("rssi {dbm} outside [{}, {}] dBm", m.rssi_floor, m.rssi_ceiling)));
        }
        Ok(Self(dbm))
    }

    pub fn dbm(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Conforming,
    LyingNonsybil,
    SybilAttacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Mobility {
    Stationary,
    /// Independent uniform displacement within `amplitude` meters per probe.
    Jitter { amplitude: f64 },
    /// Constant-acceleration motion from the node's start position.
    Trajectory { velocity: [f64; 2], acceleration: [f64; 2] },
}

/// Position and heading of a node at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub position: [f64; 2],
    pub orientation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalNode {
    pub id: NodeId,
    pub position: [f64; 2],
    /// Degrees.
    pub orientation: f64,
    /// dBm, within [0, 20].
    pub tx_power: f64,
    pub role: Role,
    pub mobility: Mobility,
    /// Constant gain added to everything this node receives, in dB.
    pub rx_offset: f64,
}

impl PhysicalNode {
    pub fn stationary(id: NodeId, position: [f64; 2], role: Role) -> Self {
        Self { id, position, orientation: 0.0, tx_power: 10.0, role, mobility: Mobility::Stationary, rx_offset: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=20.0).contains(&self.tx_power) {
            return Err(Error::Config(format!("{}: tx_power {} outside [0, 20] dBm", self.id, self.tx_power)));
        }
        if let Mobility::Jitter { amplitude } = self.mobility {
            if !(amplitude >= 0.0) {
                return Err(Error::Config(format!("{}: jitter amplitude must be >= 0", self.id)));
            }
        }
        Ok(())
    }

    pub fn state(&self) -> NodeState {
        NodeState { position: self.position, orientation: self.orientation }
    }

    /// State at `t_ms` after the start of the round. `rng` is only drawn
    /// from for jittering nodes.
    pub fn state_at(&self, t_ms: f64, rng: &mut impl Rng) -> NodeState {
        match self.mobility {
            Mobility::Stationary => self.state(),
            Mobility::Jitter { amplitude } => {
                if amplitude == 0.0 {
                    return self.state();
                }
                let r = amplitude * rng.random::<f64>().sqrt();
                let a = rng.random::<f64>() * std::f64::consts::TAU;
                NodeState { position: [self.position[0] + r * a.cos(), self.position[1] + r * a.sin()], orientation: self.orientation }
            }
            Mobility::Trajectory { velocity, acceleration } => {
                let t = t_ms / 1000.0;
                let p = |k: usize| self.position[k] + velocity[k] * t + 0.5 * acceleration[k] * t * t;
                NodeState { position: [p(0), p(1)], orientation: self.orientation }
            }
        }
    }

    /// Peak acceleration magnitude in m/s².
    pub fn peak_acceleration(&self) -> f64 {
        match self.mobility {
            Mobility::Trajectory { acceleration, .. } => acceleration[0].hypot(acceleration[1]),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    pub path_loss_exponent: f64,
    /// Path loss at 1 m, in dB.
    pub reference_loss: f64,
    pub shadowing_std: f64,
    /// Per-probe noise, in dB.
    pub measurement_std: f64,
    /// Meters.
    pub coherence_length: f64,
    /// Degrees.
    pub orientation_coherence: f64,
    pub reciprocal: bool,
    /// RSSI reporting step in dBm; 0 reports continuous values.
    pub quantization: f64,
    /// Sensitivity floor; weaker receptions are not heard.
    pub rssi_floor: f64,
    pub rssi_ceiling: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            path_loss_exponent: 3.0,
            reference_loss: 40.0,
            shadowing_std: 7.3,
            measurement_std: 1.0,
            coherence_length: 0.0625,
            orientation_coherence: 3.0,
            reciprocal: true,
            quantization: 1.0,
            rssi_floor: -100.0,
            rssi_ceiling: 0.0,
        }
    }
}

impl ChannelModel {
    /// No per-probe noise and continuous values.
    pub fn noise_free() -> Self {
        Self { measurement_std: 0.0, quantization: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shadowing_std >= 0.0 && self.measurement_std >= 0.0) {
            return Err(Error::Config("channel standard deviations must be >= 0".into()));
        }
        if !(self.coherence_length > 0.0 && self.orientation_coherence > 0.0) {
            return Err(Error::Config("coherence length and orientation coherence must be > 0".into()));
        }
        if !(self.quantization >= 0.0) {
            return Err(Error::Config("quantization must be >= 0".into()));
        }
        if !(self.rssi_floor < self.rssi_ceiling) {
            return Err(Error::Config("rssi_floor must be below rssi_ceiling".into()));
        }
        Ok(())
    }

    /// Mean path loss in dB at `distance` meters.
    pub fn path_loss(&self, distance: f64) -> f64 {
        self.reference_loss + 10.0 * self.path_loss_exponent * distance.log10()
    }

    pub fn quantize(&self, dbm: f64) -> f64 {
        if self.quantization > 0.0 {
            (dbm / self.quantization).round() * self.quantization
        } else {
            dbm
        }
    }

    fn cell(&self, s: &NodeState) -> Cell {
        let bins = (360.0 / self.orientation_coherence).round().max(1.0) as i64;
        let o = (s.orientation.rem_euclid(360.0) / self.orientation_coherence).floor() as i64 % bins;
        Cell {
            x: (s.position[0] / self.coherence_length).floor() as i64,
            y: (s.position[1] / self.coherence_length).floor() as i64,
            o,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Cell {
    x: i64,
    y: i64,
    o: i64,
}

/// Per-trial shadowing field. Every draw is a function of the trial seed and
/// the two cells alone, so query order never matters; the map only saves
/// recomputation.
#[derive(Debug, Clone)]
pub struct AttenuationCache {
    seed: u64,
    draws: HashMap<(Cell, Cell), f64>,
}

pub(crate) fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl AttenuationCache {
    pub fn new(trial_seed: u64) -> Self {
        Self { seed: trial_seed, draws: HashMap::new() }
    }

    fn standard_draw(&mut self, a: Cell, b: Cell) -> f64 {
        let seed = self.seed;
        *self.draws.entry((a, b)).or_insert_with(|| {
            let mut h = mix(seed ^ 0x5348_4144_4f57);
            for v in [a.x, a.y, a.o, b.x, b.y, b.o] {
                h = mix(h ^ v as u64);
            }
            StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(h))
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Channel gain from `tx` to `rx` in dB (negative path loss plus shadowing).
pub fn attenuation(tx: &NodeState, rx: &NodeState, m: &ChannelModel, cache: &mut AttenuationCache) -> Result<f64> {
    let d = (tx.position[0] - rx.position[0]).hypot(tx.position[1] - rx.position[1]);
    if d == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    let (a, b) = (m.cell(tx), m.cell(rx));
    let key = if m.reciprocal && b < a { (b, a) } else { (a, b) };
    let shadow = cache.standard_draw(key.0, key.1) * m.shadowing_std;
    Ok(-m.path_loss(d) + shadow)
}

/// Unclipped, unquantized received power of one probe, including noise.
fn raw_rssi(
    tx: &NodeState,
    rx: &NodeState,
    rx_offset: f64,
    tx_power: f64,
    m: &ChannelModel,
    cache: &mut AttenuationCache,
    rng: &mut impl Rng,
) -> Result<f64> {
    let h = attenuation(tx, rx, m, cache)?;
    let noise = if m.measurement_std > 0.0 {
        Normal::new(0.0, m.measurement_std).expect("std checked").sample(rng)
    } else {
        0.0
    };
    Ok(tx_power + h + rx_offset + noise)
}

/// One probe as reported by a radio: quantized and clipped to its range.
pub fn true_rssi(
    tx: &NodeState,
    rx: &NodeState,
    tx_power: f64,
    m: &ChannelModel,
    cache: &mut AttenuationCache,
    rng: &mut impl Rng,
) -> Result<Rssi> {
    let v = raw_rssi(tx, rx, 0.0, tx_power, m, cache, rng)?;
    Ok(Rssi(m.quantize(v).clamp(m.rssi_floor, m.rssi_ceiling)))
}

/// Like [`true_rssi`], but a reception below the sensitivity floor is not
/// heard at all; `rx_offset` is the receiver's constant gain.
pub fn receive(
    tx: &NodeState,
    rx: &NodeState,
    rx_offset: f64,
    tx_power: f64,
    m: &ChannelModel,
    cache: &mut AttenuationCache,
    rng: &mut impl Rng,
) -> Result<Option<f64>> {
    let v = raw_rssi(tx, rx, rx_offset, tx_power, m, cache, rng)?;
    if v < m.rssi_floor {
        return Ok(None);
    }
    Ok(Some(m.quantize(v).min(m.rssi_ceiling).max(m.rssi_floor)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64) -> NodeState {
        NodeState { position: [x, y], orientation: 0.0 }
    }

    #[test]
    fn same_cells_give_same_attenuation() {
        let m = ChannelModel::default();
        let mut c = AttenuationCache::new(9);
        let a = attenuation(&at(0.0, 0.0), &at(3.0, 4.0), &m, &mut c).unwrap();
        let b = attenuation(&at(0.01, 0.01), &at(3.0, 4.0), &m, &mut c).unwrap();
        let mut fresh = AttenuationCache::new(9);
        let back = attenuation(&at(3.0, 4.0), &at(0.0, 0.0), &m, &mut fresh).unwrap();
        // Same cells, nearly the same distance.
        assert!((a - b).abs() < 0.05);
        assert_eq!(a, back);
    }

    #[test]
    fn doubling_distance_costs_nine_db() {
        let m = ChannelModel::default();
        let diff = m.path_loss(8.0) - m.path_loss(4.0);
        assert!((diff - 30.0 * 2f64.log10()).abs() < 1e-12);
        assert!((diff - 9.03).abs() < 0.01);
    }

    #[test]
    fn coincident_positions_error() {
        let m = ChannelModel::default();
        let mut c = AttenuationCache::new(1);
        assert_eq!(attenuation(&at(1.0, 1.0), &at(1.0, 1.0), &m, &mut c), Err(Error::CoincidentPositions));
    }

    #[test]
    fn power_shift_shows_at_every_receiver() {
        let m = ChannelModel::noise_free();
        let mut c = AttenuationCache::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tx = at(0.0, 0.0);
        for rx in [at(2.0, 0.0), at(0.0, 7.5), at(-3.0, 1.0)] {
            let lo = true_rssi(&tx, &rx, 4.0, &m, &mut c, &mut rng).unwrap().dbm();
            let hi = true_rssi(&tx, &rx, 6.5, &m, &mut c, &mut rng).unwrap().dbm();
            assert!((hi - lo - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn quantize_and_floor() {
        let m = ChannelModel { shadowing_std: 0.0, measurement_std: 0.0, ..ChannelModel::default() };
        let mut c = AttenuationCache::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let far = receive(&at(0.0, 0.0), &at(5000.0, 0.0), 0.0, 0.0, &m, &mut c, &mut rng).unwrap();
        assert_eq!(far, None);
        let near = receive(&at(0.0, 0.0), &at(2.0, 0.0), 0.0, 10.0, &m, &mut c, &mut rng).unwrap().unwrap();
        assert_eq!(near, near.round());
        assert!(Rssi::new(5.0, &m).is_err());
    }

    #[test]
    fn trajectory_and_jitter() {
        let mut n = PhysicalNode::stationary(NodeId(0), [1.0, 1.0], Role::Conforming);
        n.mobility = Mobility::Trajectory { velocity: [0.0, 0.0], acceleration: [3.0, 0.0] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(n.state_at(1000.0, &mut rng).position, [2.5, 1.0]);
        assert_eq!(n.peak_acceleration(), 3.0);
        n.mobility = Mobility::Jitter { amplitude: 0.1 };
        let s = n.state_at(0.0, &mut rng);
        assert!(((s.position[0] - 1.0).hypot(s.position[1] - 1.0)) <= 0.1);
        n.tx_power = 25.0;
        assert!(n.validate().is_err());
    }
}
