//! Line encoding of telemetry messages. Fields are tab-separated in fixed
//! order `sensor_id, kind, seq, device_ts_s, corrected_ts_s, batch`; floats
//! carry 6 decimals, a missing corrected timestamp is `-`. Inline batches
//! separate samples with `;` and values with `,`. Raw EEG is stored in the
//! sidecar instead and referenced as `@<offset>x<count>` (values, not bytes).

use super::{PipelineError, SensorKind, TelemetryMessage};

#[derive(Debug, Clone, PartialEq)]
pub enum WirePayload {
    Inline,
    Sidecar { offset: u64, count: u64 },
}

pub fn f6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn encode_message(msg: &TelemetryMessage, payload: &WirePayload) -> String {
    let corrected = msg.corrected_ts_s.map_or_else(|| "-".to_string(), f6);
    let batch = match payload {
        WirePayload::Inline => msg.payload.iter().map(|frame| frame.iter().map(|v| f6(*v)).collect::<Vec<_>>().join(",")).collect::<Vec<_>>().join(";"),
        WirePayload::Sidecar { offset, count } => format!("@{offset}x{count}"),
    };
    format!("{}\t{}\t{}\t{}\t{}\t{}", msg.sensor_id, msg.kind.as_str(), msg.seq, f6(msg.device_ts_s), corrected, batch)
}

/// Parses the fields written by [`encode_message`]. For sidecar payloads
/// the returned message has an empty payload and the reference is returned
/// for the caller to resolve.
pub fn decode_message(line: &str) -> Result<(TelemetryMessage, WirePayload), PipelineError> {
    let bad = |m: &str| PipelineError::Wire(format!("{m}: {line:?}"));
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 6 {
        return Err(bad("expected 6 fields"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
    let kind = SensorKind::parse(f[1]).ok_or_else(|| bad("bad sensor kind"))?;
    let seq = f[2].parse().map_err(|_| bad("bad seq"))?;
    let device_ts_s = num(f[3])?;
    let corrected_ts_s = if f[4] == "-" { None } else { Some(num(f[4])?) };
    let (payload, wire) = if let Some(r) = f[5].strip_prefix('@') {
        let (o, c) = r.split_once('x').ok_or_else(|| bad("bad sidecar reference"))?;
        let offset = o.parse().map_err(|_| bad("bad sidecar offset"))?;
        let count = c.parse().map_err(|_| bad("bad sidecar count"))?;
        (Vec::new(), WirePayload::Sidecar { offset, count })
    } else if f[5].is_empty() {
        (Vec::new(), WirePayload::Inline)
    } else {
        let frames = f[5].split(';').map(|fr| fr.split(',').map(num).collect::<Result<Vec<_>, _>>()).collect::<Result<Vec<_>, _>>()?;
        (frames, WirePayload::Inline)
    };
    Ok((TelemetryMessage { sensor_id: f[0].to_string(), kind, seq, device_ts_s, corrected_ts_s, payload }, wire))
}
