//! Monte Carlo harness: scenario files, trial execution, metrics, grid
//! sweeps and ROC tables.
//!
//! A scenario runs in one of two modes. `pipeline` builds a world, runs the
//! full protocol and classifies. `guess-model` skips the radio and samples
//! the attacker's guessing game directly, which is what the large trial
//! counts of the security metrics need.

mod roc;
mod scenario;
mod stats;
mod sweep;
mod trial;

use serde::{Deserialize, Serialize};

use crate::adversary::AttackerStrategy;
use crate::channel::ChannelModel;
use crate::classification::{ClassifierConfig, GammaConfig, Policy};
use crate::error::{Error, Result};
use crate::protocol::ProtocolConfig;
use crate::signalprint::SignalprintThresholds;
use crate::world::{Jamming, RevealBehavior};

pub use roc::{knee, roc_curve, roc_distances, roc_samples, RocPoint, RocSample};
pub use scenario::build_world;
pub use stats::{wilson_interval, Summary};
pub use sweep::{sweep_grid, SweepRow};
pub use trial::{run_trial, run_trials, trial_seed, trial_trace, Confusion, TrialResult};

/// Writes rows as CSV with a header line.
pub fn write_csv<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Domain(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Domain(format!("csv: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Pipeline,
    GuessModel,
}

/// Identity counts. The initiator is extra and not counted in `conforming`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Counts {
    pub conforming: usize,
    pub lying_nonsybil: usize,
    /// Radios claiming `attacker.sybils_per_node` identities each.
    pub attacker_nodes: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Self { conforming: 10, lying_nonsybil: 0, attacker_nodes: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    /// Side of the square deployment area, meters.
    pub area: f64,
    /// Smallest distance between two radios, meters.
    pub min_separation: f64,
    /// Per-probe jitter amplitude of conforming radios, meters.
    pub conforming_jitter: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { area: 15.0, min_separation: 0.5, conforming_jitter: 0.0 }
    }
}

/// Classifier settings, flattened for scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub policy: Policy,
    pub dim2: f64,
    pub dim3: f64,
    pub dim4: f64,
    pub motion_std: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    /// Receiver set size.
    pub n: usize,
    pub looseness: f64,
    pub multiplier: usize,
    pub ratio_tolerance: Option<f64>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let t = SignalprintThresholds::<f64>::default();
        let g = GammaConfig::<f64>::default();
        let c = ClassifierConfig::<f64>::default();
        Self {
            policy: Policy::Consistency,
            dim2: t.dim2,
            dim3: t.dim3,
            dim4: t.dim4,
            motion_std: t.motion_std,
            gamma2: g.gamma2,
            gamma3: g.gamma3,
            gamma4: g.gamma4,
            n: g.n,
            looseness: c.looseness,
            multiplier: c.multiplier,
            ratio_tolerance: None,
        }
    }
}

impl ClassifierSection {
    pub fn thresholds(&self) -> SignalprintThresholds<f64> {
        SignalprintThresholds { dim2: self.dim2, dim3: self.dim3, dim4: self.dim4, motion_std: self.motion_std }
    }

    pub fn gamma(&self) -> GammaConfig<f64> {
        GammaConfig { gamma2: self.gamma2, gamma3: self.gamma3, gamma4: self.gamma4, n: self.n }
    }

    pub fn config(&self, seed: u64) -> ClassifierConfig<f64> {
        ClassifierConfig {
            thresholds: self.thresholds(),
            gamma: self.gamma(),
            looseness: self.looseness,
            multiplier: self.multiplier,
            ratio_tolerance: self.ratio_tolerance,
            seed,
        }
    }
}

/// Grid axes for `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepAxes {
    pub conforming: Vec<usize>,
    pub lying_nonsybil: Vec<usize>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self { conforming: (5..=30).step_by(5).collect(), lying_nonsybil: (0..=10).step_by(2).collect() }
    }
}

/// Dimension-4 thresholds swept by `roc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RocSection {
    pub thresholds: Vec<f64>,
}

impl Default for RocSection {
    fn default() -> Self {
        Self { thresholds: (0..=160).map(|k| k as f64 * 0.05).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    /// Master seed; every trial seed derives from it.
    pub seed: u64,
    pub trials: usize,
    pub counts: Counts,
    pub geometry: Geometry,
    pub channel: ChannelModel,
    pub attacker: AttackerStrategy,
    pub reveal: RevealBehavior,
    pub jamming: Option<Jamming>,
    pub classifier: ClassifierSection,
    pub protocol: ProtocolConfig,
    pub sweep: SweepAxes,
    pub roc: RocSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            mode: Mode::Pipeline,
            seed: 0,
            trials: 100,
            counts: Counts::default(),
            geometry: Geometry::default(),
            channel: ChannelModel::default(),
            attacker: AttackerStrategy::default(),
            reveal: RevealBehavior::Honest,
            jamming: None,
            classifier: ClassifierSection::default(),
            protocol: ProtocolConfig::default(),
            sweep: SweepAxes::default(),
            roc: RocSection::default(),
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn sybil_count(&self) -> usize {
        self.counts.attacker_nodes * self.attacker.sybils_per_node
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.channel.validate()?;
        self.attacker.validate()?;
        self.protocol.validate()?;
        self.classifier.config(0).validate()?;
        let n = self.classifier.n;
        if self.counts.conforming + 1 < n {
            return Err(Error::Config(format!(
                "{} conforming identities cannot fill receiver sets of size {n}",
                self.counts.conforming
            )));
        }
        if !(self.geometry.area > 0.0 && self.geometry.min_separation >= 0.0 && self.geometry.conforming_jitter >= 0.0) {
            return Err(Error::Config("geometry values must be positive".into()));
        }
        if self.sweep.conforming.is_empty() || self.sweep.lying_nonsybil.is_empty() {
            return Err(Error::Config("sweep axes must not be empty".into()));
        }
        if self.roc.thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("roc thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_keep_defaults() {
        let cfg = ScenarioConfig::from_toml("trials = 7\n[classifier]\ndim4 = 1.5\npolicy = \"max-sybil\"\n").unwrap();
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.classifier.dim4, 1.5);
        assert_eq!(cfg.classifier.dim2, 0.85);
        assert_eq!(cfg.classifier.policy, Policy::MaxSybil);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let e = ScenarioConfig::from_toml("trials = 3\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(ScenarioConfig::from_toml("[counts]\nconforming = 1\n").is_err());
        assert!(ScenarioConfig::from_toml("[classifier]\ngamma4 = 0.5\n").is_err());
        assert!(ScenarioConfig::from_toml("jamming = { phase = \"hello\", victim = 3 }\n").is_ok());
    }
}
