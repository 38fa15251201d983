use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::profile::{validate_profile, Eligibility, ParticipantProfile};
use super::walker::WalkerParams;
use super::HarnessError;
use crate::geo::PathSpec;
use crate::learner::{RetrainPolicy, TrainConfig};
use crate::network::DEFAULT_THRESHOLD;
use crate::pipeline::{find_device, BatteryState, LinkModel, LoadProfile};
use crate::protocol::{CaseCPolicy, DisturbanceSpec, Phase};
use crate::signal::{EegConfig, ModulationDepths, RhythmAmplitudes};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionSim {
    pub depths: ModulationDepths,
    pub rhythms: RhythmAmplitudes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkModels {
    /// Wearable to smartphone (BLE).
    pub sensor_gateway: LinkModel,
    /// Smartphone to cloud, both directions.
    pub gateway_cloud: LinkModel,
}

impl Default for LinkModels {
    fn default() -> Self {
        LinkModels {
            sensor_gateway: LinkModel { latency_ms: 20.0, jitter_ms: 10.0, loss_rate: 0.0 },
            gateway_cloud: LinkModel { latency_ms: 80.0, jitter_ms: 40.0, loss_rate: 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub capacity_mah: f64,
    pub load: LoadProfile,
}

impl BatterySpec {
    pub fn state(&self) -> Result<BatteryState, HarnessError> {
        BatteryState::new(self.capacity_mah, self.load).map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Batteries {
    pub eeg_headset: BatterySpec,
    pub smartwatch: BatterySpec,
    pub smartphone: BatterySpec,
}

impl Default for Batteries {
    fn default() -> Self {
        let load = |gps_ma, display_ma, cpu_ma, radio_ma| LoadProfile { gps_ma, display_ma, cpu_ma, radio_ma };
        Batteries {
            eeg_headset: BatterySpec { capacity_mah: 600.0, load: load(0.0, 0.0, 40.0, 20.0) },
            smartwatch: BatterySpec { capacity_mah: 100.0, load: load(0.0, 0.0, 3.0, 2.0) },
            smartphone: BatterySpec { capacity_mah: 3000.0, load: load(30.0, 80.0, 60.0, 30.0) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSetup {
    /// EEG samples per message.
    pub eeg_batch: usize,
    pub hr_hz: f64,
    /// Also the walker's sampling rate.
    pub gps_hz: f64,
    pub accel_hz: f64,
    pub accel_batch: usize,
    /// Wearable clock offsets are drawn uniformly from ±this.
    pub clock_offset_max_s: f64,
    pub clock_drift_max_ppm: f64,
    /// Optional EEG device from the registry; rate and channels must fit it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eeg_device: Option<String>,
    pub batteries: Batteries,
}

impl Default for SensorSetup {
    fn default() -> Self {
        SensorSetup {
            eeg_batch: 25,
            hr_hz: 1.0,
            gps_hz: 1.0,
            accel_hz: 50.0,
            accel_batch: 25,
            clock_offset_max_s: 0.5,
            clock_drift_max_ppm: 20.0,
            eeg_device: None,
            batteries: Batteries::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSet {
    pub walker: u64,
    pub eeg: u64,
    pub links: u64,
    pub protocol: u64,
    pub learner: u64,
}

impl SeedSet {
    /// All five seeds derived from one number.
    pub fn from_base(base: u64) -> SeedSet {
        SeedSet { walker: mix(base, 1), eeg: mix(base, 2), links: mix(base, 3), protocol: mix(base, 4), learner: mix(base, 5) }
    }
}

/// splitmix64 of `a ^ (b · golden)`, kept below 2^63 so it fits a TOML
/// integer.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (z ^ (z >> 31)) >> 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub phase: Phase,
    pub n_sessions: u32,
    #[serde(default)]
    pub case_c_policy: CaseCPolicy,
    /// Correlation threshold for the brain-network metric series.
    #[serde(default = "default_threshold")]
    pub graph_threshold: f64,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub retrain: RetrainPolicy,
    #[serde(default)]
    pub walker: WalkerParams,
    #[serde(default)]
    pub eeg: EegConfig,
    #[serde(default)]
    pub attention: AttentionSim,
    #[serde(default)]
    pub links: LinkModels,
    #[serde(default)]
    pub sensors: SensorSetup,
    pub participant: ParticipantProfile,
    pub seeds: BTreeMap<String, SeedSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub task2: Vec<DisturbanceSpec>,
    pub path: PathSpec,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl Scenario {
    /// Parses and validates a scenario file.
    pub fn from_toml(text: &str) -> Result<Scenario, HarnessError> {
        let s: Scenario = toml::from_str(text).map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Canonical text: the serialization of the parsed scenario, so
    /// formatting and key order in the source file do not matter.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn seed_set(&self, name: &str) -> Result<SeedSet, HarnessError> {
        self.seeds.get(name).copied().ok_or_else(|| HarnessError::UnknownSeedSet(name.to_string()))
    }

    pub fn with_phase(mut self, phase: Phase) -> Scenario {
        self.phase = phase;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ScenarioInvalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.n_sessions < 2 {
            return bad(format!("n_sessions must be at least 2, got {}", self.n_sessions));
        }
        if let Eligibility::Ineligible { reasons } = validate_profile(&self.participant) {
            let r: Vec<String> = reasons.iter().map(|r| r.to_string()).collect();
            return bad(format!("participant {} is not eligible: {}", self.participant.id, r.join(", ")));
        }
        if let Err(e) = self.eeg.validate() {
            return bad(e.to_string());
        }
        for l in [self.links.sensor_gateway, self.links.gateway_cloud] {
            if let Err(e) = l.validate() {
                return bad(e.to_string());
            }
        }
        if let Err(e) = self.walker.validate() {
            return bad(e);
        }
        let d = self.attention.depths;
        let r = self.attention.rhythms;
        if !(d.theta >= 0.0 && (0.0..=1.0).contains(&d.alpha)) || [r.theta_uv, r.alpha_uv, r.beta_uv, r.noise_uv].iter().any(|v| !(*v >= 0.0)) {
            return bad(format!("invalid attention simulation {:?}", self.attention));
        }
        if !(self.graph_threshold > 0.0 && self.graph_threshold <= 1.0) {
            return bad(format!("graph_threshold {} must lie in (0, 1]", self.graph_threshold));
        }
        if self.training.epochs == 0 || !(self.training.step_size > 0.0) || !(self.training.l2 >= 0.0) {
            return bad(format!("invalid training configuration {:?}", self.training));
        }
        let s = &self.sensors;
        let rates = [s.hr_hz, s.gps_hz, s.accel_hz];
        if s.eeg_batch == 0 || s.accel_batch == 0 || rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("sensor rates and batch sizes must be positive".into());
        }
        if !(s.clock_offset_max_s >= 0.0 && s.clock_drift_max_ppm >= 0.0) {
            return bad("clock offset and drift bounds must be non-negative".into());
        }
        for b in [s.batteries.eeg_headset, s.batteries.smartwatch, s.batteries.smartphone] {
            b.state()?;
        }
        if let Some(name) = &s.eeg_device {
            let Some(dev) = find_device(name) else { return bad(format!("unknown EEG device {name}")) };
            if !dev.sampling.supports(self.eeg.fs_hz) || !dev.channels.supports(self.eeg.channels.len() as u32) {
                return bad(format!("{} does not support {} channels at {} Hz", dev.brand_product, self.eeg.channels.len(), self.eeg.fs_hz));
            }
        }
        if self.seeds.is_empty() {
            return bad("at least one seed set is required".into());
        }
        let mut ids = BTreeSet::new();
        for d in &self.task2 {
            if !ids.insert(d.id.as_str()) {
                return bad(format!("duplicate disturbance id {}", d.id));
            }
            if !(d.trigger_ts_offset_s >= 0.0 && d.response_deadline_s > 0.0) {
                return bad(format!("disturbance {} needs a non-negative trigger and a positive deadline", d.id));
            }
        }
        Ok(())
    }
}
