use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ForwardedBatch, PipelineError, SensorKind, TelemetryMessage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub kind: SensorKind,
    pub rate_hz: f64,
    pub batch: usize,
}

#[derive(Debug, Clone, Default)]
pub struct CloudStream {
    pub info: Option<StreamInfo>,
    pub messages: BTreeMap<u64, TelemetryMessage>,
    pub gaps: BTreeSet<u64>,
}

impl CloudStream {
    pub fn sample_count(&self) -> usize {
        self.messages.values().map(|m| m.payload.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ack {
    pub stored: usize,
    pub duplicates: usize,
}

/// One stored sample with its corrected timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudSample {
    pub sensor_id: String,
    pub ts: f64,
    pub values: Vec<f64>,
}

/// Cloud store: per session, per sensor, messages keyed by sequence number.
#[derive(Debug, Clone, Default)]
pub struct Cloud {
    sessions: BTreeMap<String, BTreeMap<String, CloudStream>>,
}

impl Cloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_session(&mut self, session_id: &str, streams: &[(String, StreamInfo)]) {
        let s = self.sessions.entry(session_id.to_string()).or_default();
        for (id, info) in streams {
            s.entry(id.clone()).or_default().info = Some(*info);
        }
    }

    /// Idempotent by `(sensor_id, seq)`.
    pub fn store(&mut self, session_id: &str, batch: &ForwardedBatch) -> Result<Ack, PipelineError> {
        let s = self.sessions.get_mut(session_id).ok_or_else(|| PipelineError::UnknownSession(session_id.to_string()))?;
        let stream = s.entry(batch.sensor_id.clone()).or_default();
        let mut ack = Ack::default();
        for m in &batch.messages {
            if let std::collections::btree_map::Entry::Vacant(e) = stream.messages.entry(m.seq) {
                e.insert(m.clone());
                ack.stored += 1;
            } else {
                ack.duplicates += 1;
            }
        }
        stream.gaps.extend(batch.gaps.iter().copied());
        Ok(ack)
    }

    pub fn stream(&self, session_id: &str, sensor_id: &str) -> Result<Option<&CloudStream>, PipelineError> {
        let s = self.sessions.get(session_id).ok_or_else(|| PipelineError::UnknownSession(session_id.to_string()))?;
        Ok(s.get(sensor_id))
    }

    /// Samples of every `kind` sensor with corrected timestamp in `[t0, t1)`,
    /// ordered by timestamp. Per-sample times are spaced by the stream rate.
    pub fn query(&self, session_id: &str, kind: SensorKind, t0: f64, t1: f64) -> Result<Vec<CloudSample>, PipelineError> {
        let s = self.sessions.get(session_id).ok_or_else(|| PipelineError::UnknownSession(session_id.to_string()))?;
        let mut out = Vec::new();
        for (id, stream) in s {
            let Some(info) = stream.info.filter(|i| i.kind == kind) else { continue };
            for m in stream.messages.values() {
                let base = m.corrected_ts_s.unwrap_or(m.device_ts_s);
                for (i, values) in m.payload.iter().enumerate() {
                    let ts = base + i as f64 / info.rate_hz;
                    if ts >= t0 && ts < t1 {
                        out.push(CloudSample { sensor_id: id.clone(), ts, values: values.clone() });
                    }
                }
            }
        }
        out.sort_by(|a, b| a.ts.total_cmp(&b.ts).then_with(|| a.sensor_id.cmp(&b.sensor_id)));
        Ok(out)
    }
}
