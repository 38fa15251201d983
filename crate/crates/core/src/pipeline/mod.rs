//! Three-tier telemetry: sensor agents with batteries and skewed clocks,
//! lossy links, the smartphone gateway (dedupe, reorder, clock correction,
//! batching) and the idempotent cloud store. Everything is driven by the
//! deterministic [`des::EventQueue`] owned by the session engine.

mod battery;
mod cloud;
pub mod des;
mod devices;
mod gateway;
mod link;
mod sensor;
pub mod wire;

pub use battery::{BatteryState, LoadProfile};
pub use cloud::{Ack, Cloud, CloudSample, CloudStream, StreamInfo};
pub use devices::{device_registry, find_device, ChannelCount, DeviceProfile, Price, SamplingRate};
pub use gateway::{estimate_offset, ForwardedBatch, GatewayCounters, GatewayState, IngestOutcome, AGGREGATION_WINDOW_S, REORDER_HORIZON_S};
pub use link::{Link, LinkModel};
pub use sensor::{Emission, SensorAgent};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("sensor {sensor_id} battery exhausted at {at:.3} s")]
    BatteryExhausted { sensor_id: String, at: f64 },
    #[error("invalid link model: {0}")]
    InvalidLink(String),
    #[error("invalid battery: {0}")]
    InvalidBattery(String),
    #[error("invalid sensor: {0}")]
    InvalidSensor(String),
    #[error("round trip ends before it starts ({t_req} > {t_resp})")]
    NegativeRoundTrip { t_req: f64, t_resp: f64 },
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("malformed wire record: {0}")]
    Wire(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Eeg,
    HeartRate,
    Gps,
    Accel,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Eeg => "eeg",
            SensorKind::HeartRate => "hr",
            SensorKind::Gps => "gps",
            SensorKind::Accel => "accel",
        }
    }

    pub fn parse(s: &str) -> Option<SensorKind> {
        match s {
            "eeg" => Some(SensorKind::Eeg),
            "hr" => Some(SensorKind::HeartRate),
            "gps" => Some(SensorKind::Gps),
            "accel" => Some(SensorKind::Accel),
            _ => None,
        }
    }
}

/// One batch of samples from one sensor. `payload` holds one entry per
/// sample; multichannel samples are frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryMessage {
    pub sensor_id: String,
    pub kind: SensorKind,
    pub seq: u64,
    pub device_ts_s: f64,
    pub corrected_ts_s: Option<f64>,
    pub payload: Vec<Vec<f64>>,
}

impl TelemetryMessage {
    pub fn batch_size(&self) -> usize {
        self.payload.len()
    }
}
