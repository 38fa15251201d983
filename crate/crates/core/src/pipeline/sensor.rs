use serde::{Deserialize, Serialize};

use super::{BatteryState, PipelineError, SensorKind, TelemetryMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorAgent {
    pub id: String,
    pub kind: SensorKind,
    pub rate_hz: f64,
    /// Samples per message.
    pub batch: usize,
    pub clock_offset_s: f64,
    pub clock_drift_ppm: f64,
    pub battery: BatteryState,
    /// Sequence number of the last emitted message; the first is 1.
    pub seq: u64,
    /// Simulated time the agent was switched on.
    pub start_s: f64,
    pub exhausted_at: Option<f64>,
}

/// Messages produced by one [`SensorAgent::emit`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    pub messages: Vec<TelemetryMessage>,
    /// Set on the call during which the battery ran out.
    pub exhausted_at: Option<f64>,
}

impl SensorAgent {
    pub fn new(id: impl Into<String>, kind: SensorKind, rate_hz: f64, batch: usize, battery: BatteryState) -> Result<Self, PipelineError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) || batch == 0 {
            return Err(PipelineError::InvalidSensor(format!("rate {rate_hz} Hz, batch {batch}")));
        }
        Ok(SensorAgent { id: id.into(), kind, rate_hz, batch, clock_offset_s: 0.0, clock_drift_ppm: 0.0, battery, seq: 0, start_s: 0.0, exhausted_at: None })
    }

    pub fn with_clock(mut self, offset_s: f64, drift_ppm: f64) -> Self {
        self.clock_offset_s = offset_s;
        self.clock_drift_ppm = drift_ppm;
        self
    }

    /// The agent's local clock reading at simulated time `t`.
    pub fn device_time(&self, t: f64) -> f64 {
        t * (1.0 + self.clock_drift_ppm * 1e-6) + self.clock_offset_s
    }

    /// Simulated time at which message `seq` is complete and sent.
    pub fn send_time(&self, seq: u64) -> f64 {
        self.start_s + (seq as f64 * self.batch as f64) / self.rate_hz
    }

    /// Simulated time of the first sample carried by message `seq`.
    pub fn first_sample_time(&self, seq: u64) -> f64 {
        self.start_s + ((seq - 1) as f64 * self.batch as f64) / self.rate_hz
    }

    pub fn battery_empty_at(&self) -> f64 {
        self.start_s + self.battery.lifetime_s()
    }

    /// Emits every message whose batch completed by `now`. `frame` yields
    /// the sample with the given index. Messages that would complete after
    /// the battery runs out are never sent.
    pub fn emit(&mut self, now: f64, frame: &mut dyn FnMut(u64) -> Vec<f64>) -> Result<Emission, PipelineError> {
        if let Some(at) = self.exhausted_at {
            return Err(PipelineError::BatteryExhausted { sensor_id: self.id.clone(), at });
        }
        let empty_at = self.battery_empty_at();
        let mut messages = Vec::new();
        loop {
            let next = self.seq + 1;
            let t = self.send_time(next);
            if t > now || t > empty_at {
                break;
            }
            let first = (next - 1) * self.batch as u64;
            let payload = (first..first + self.batch as u64).map(&mut *frame).collect();
            messages.push(TelemetryMessage {
                sensor_id: self.id.clone(),
                kind: self.kind,
                seq: next,
                device_ts_s: self.device_time(self.first_sample_time(next)),
                corrected_ts_s: None,
                payload,
            });
            self.seq = next;
        }
        self.battery.draw_until(now.min(empty_at) - self.start_s);
        let exhausted_at = (now >= empty_at).then_some(empty_at);
        self.exhausted_at = exhausted_at;
        Ok(Emission { messages, exhausted_at })
    }
}
