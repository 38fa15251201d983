use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{PipelineError, SensorKind, TelemetryMessage};

pub const REORDER_HORIZON_S: f64 = 0.5;
pub const AGGREGATION_WINDOW_S: f64 = 1.0;

/// Clock offset from one request/response exchange, assuming symmetric
/// legs: `t_at_sensor − (t_req + t_resp) / 2`. The error is half the leg
/// asymmetry.
pub fn estimate_offset(t_req_gw: f64, t_at_sensor: f64, t_resp_gw: f64) -> Result<f64, PipelineError> {
    if t_resp_gw < t_req_gw {
        return Err(PipelineError::NegativeRoundTrip { t_req: t_req_gw, t_resp: t_resp_gw });
    }
    Ok(t_at_sensor - (t_req_gw + t_resp_gw) / 2.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayCounters {
    pub received: u64,
    pub forwarded: u64,
    pub duplicates: u64,
    pub late_dropped: u64,
    pub gaps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    Buffered,
    Duplicate,
    /// Arrived after its sequence number had been declared missing.
    Late,
}

/// Per-sensor batch handed to the cloud uplink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardedBatch {
    pub sensor_id: String,
    pub kind: SensorKind,
    /// Seq-ordered, with corrected timestamps set.
    pub messages: Vec<TelemetryMessage>,
    /// Sequence numbers given up as lost.
    pub gaps: Vec<u64>,
}

#[derive(Debug, Clone)]
struct SensorBuffer {
    kind: SensorKind,
    next_seq: u64,
    pending: BTreeMap<u64, (f64, TelemetryMessage)>,
    gapped: BTreeSet<u64>,
    offset_s: f64,
    counters: GatewayCounters,
}

#[derive(Debug, Clone)]
pub struct GatewayState {
    pub horizon_s: f64,
    pub window_s: f64,
    sensors: BTreeMap<String, SensorBuffer>,
}

impl Default for GatewayState {
    fn default() -> Self {
        GatewayState { horizon_s: REORDER_HORIZON_S, window_s: AGGREGATION_WINDOW_S, sensors: BTreeMap::new() }
    }
}

impl GatewayState {
    pub fn new() -> Self {
        Self::default()
    }

    fn buffer(&mut self, sensor_id: &str, kind: SensorKind) -> &mut SensorBuffer {
        self.sensors.entry(sensor_id.to_string()).or_insert_with(|| SensorBuffer {
            kind,
            next_seq: 1,
            pending: BTreeMap::new(),
            gapped: BTreeSet::new(),
            offset_s: 0.0,
            counters: GatewayCounters::default(),
        })
    }

    pub fn register(&mut self, sensor_id: &str, kind: SensorKind) {
        self.buffer(sensor_id, kind);
    }

    pub fn set_offset(&mut self, sensor_id: &str, kind: SensorKind, offset_s: f64) {
        self.buffer(sensor_id, kind).offset_s = offset_s;
    }

    pub fn offset(&self, sensor_id: &str) -> Option<f64> {
        self.sensors.get(sensor_id).map(|b| b.offset_s)
    }

    pub fn counters(&self, sensor_id: &str) -> Option<GatewayCounters> {
        self.sensors.get(sensor_id).map(|b| b.counters)
    }

    pub fn ingest(&mut self, msg: TelemetryMessage, arrival_ts: f64) -> IngestOutcome {
        let b = self.buffer(&msg.sensor_id, msg.kind);
        b.counters.received += 1;
        if msg.seq < b.next_seq {
            if b.gapped.contains(&msg.seq) {
                b.counters.late_dropped += 1;
                return IngestOutcome::Late;
            }
            b.counters.duplicates += 1;
            return IngestOutcome::Duplicate;
        }
        if b.pending.contains_key(&msg.seq) {
            b.counters.duplicates += 1;
            return IngestOutcome::Duplicate;
        }
        b.pending.insert(msg.seq, (arrival_ts, msg));
        IngestOutcome::Buffered
    }

    fn release(b: &mut SensorBuffer, now: f64, horizon: f64, force: bool) -> (Vec<TelemetryMessage>, Vec<u64>) {
        let (mut out, mut gaps) = (Vec::new(), Vec::new());
        loop {
            if let Some((_, mut m)) = b.pending.remove(&b.next_seq) {
                m.corrected_ts_s = Some(m.device_ts_s - b.offset_s);
                out.push(m);
                b.next_seq += 1;
                continue;
            }
            let Some(&head) = b.pending.keys().next() else { break };
            let oldest = b.pending.values().map(|(a, _)| *a).fold(f64::INFINITY, f64::min);
            if !(force || now - oldest >= horizon) {
                break;
            }
            for s in b.next_seq..head {
                b.gapped.insert(s);
                gaps.push(s);
            }
            b.next_seq = head;
        }
        b.counters.forwarded += out.len() as u64;
        b.counters.gaps += gaps.len() as u64;
        (out, gaps)
    }

    fn collect(&mut self, now: f64, force: bool) -> Vec<ForwardedBatch> {
        let horizon = self.horizon_s;
        let mut batches = Vec::new();
        for (id, b) in self.sensors.iter_mut() {
            let (messages, gaps) = Self::release(b, now, horizon, force);
            if !messages.is_empty() || !gaps.is_empty() {
                batches.push(ForwardedBatch { sensor_id: id.clone(), kind: b.kind, messages, gaps });
            }
        }
        batches
    }

    /// Periodic aggregation: forwards each sensor's in-order prefix. A hole
    /// is declared lost once a later message has waited a full reorder
    /// horizon.
    pub fn flush(&mut self, now: f64) -> Vec<ForwardedBatch> {
        self.collect(now, false)
    }

    /// End-of-session flush: every buffered message is forwarded and all
    /// remaining holes become gaps.
    pub fn drain(&mut self, now: f64) -> Vec<ForwardedBatch> {
        self.collect(now, true)
    }
}
