//! Session log: tab-separated, append-only records grouped into segments.
//! Each segment ends with `HSH <sha256> <sidecar values>`, where the digest
//! chains the previous digest, the segment's text and the raw EEG it added
//! to the sidecar. The header segment carries the scenario; one segment per
//! session follows; the last segment holds `END`.
//!
//! Session records (`s` is the 1-based session index, floats 6 decimals):
//!
//! | tag   | fields |
//! |-------|--------|
//! | `SES` | s, `start`, plan JSON / s, `end`, ts |
//! | `SYN` | s, sensor, t_req, t_at_sensor, t_resp, offset |
//! | `MSG` | s, cloud arrival ts, wire-encoded message |
//! | `EVT` | s, ts, kind, place or `-`, rationale |
//! | `CLS` | s, ts, window index, window start, label, confidence |
//! | `DST` | s, ts, id, kind, payload (JSON string) |
//! | `ACK` | s, ts, id |
//! | `CMD` | s, ts, command JSON, `applied` or `rejected`, reason or `-` |
//! | `BAT` | s, ts, sensor, remaining fraction, `ok` or `exhausted` |
//! | `TRN` | s, records, semi-supervised records, model digest |
//! | `CNT` | s, sensor, emitted, link-dropped, uplink-dropped, late-dropped, duplicates, stored |
//!
//! Derived records (`WIN`, `BEH`, `EVL`, `MET`) follow `SES end` and are
//! recomputed on replay.

use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::scenario::{Scenario, SeedSet};
use super::HarnessError;
use crate::pipeline::wire::{decode_message, encode_message, f6, WirePayload};
use crate::pipeline::{SensorKind, TelemetryMessage};
use crate::protocol::{FeedbackEvent, FeedbackKind, Rationale};
use crate::signal::sidecar;
use crate::AttentionLabel;

pub const LOG_MAGIC: &str = "ACTA-LOG";
pub const LOG_VERSION: u32 = 1;

/// Log text plus the raw-EEG sidecar (little-endian f32, channel-major per
/// message).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionLog {
    pub text: String,
    pub eeg: Vec<u8>,
}

impl SessionLog {
    pub fn sidecar_path(log: &Path) -> PathBuf {
        let mut p = log.as_os_str().to_owned();
        p.push(".eeg.bin");
        PathBuf::from(p)
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, &self.text)?;
        std::fs::write(Self::sidecar_path(path), &self.eeg)
    }

    pub fn read(path: &Path) -> Result<SessionLog, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let side = Self::sidecar_path(path);
        let eeg = std::fs::read(&side).map_err(|e| HarnessError::CorruptLog(format!("sidecar {}: {e}", side.display())))?;
        Ok(SessionLog { text, eeg })
    }

    /// Lines of the given record tag.
    pub fn records<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.text.lines().filter(move |l| l.split('\t').next() == Some(tag))
    }
}

fn digest(prev: &str, text: &[u8], eeg: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(prev.as_bytes());
    h.update(text);
    h.update(eeg);
    hex::encode(h.finalize())
}

/// Append-only writer that seals segments.
#[derive(Debug, Clone, Default)]
pub(crate) struct LogWriter {
    log: SessionLog,
    seg_text: usize,
    seg_eeg: usize,
    chain: String,
    /// Lines not yet handed to observers.
    fresh: Vec<String>,
}

impl LogWriter {
    pub fn line(&mut self, l: String) {
        self.log.text.push_str(&l);
        self.log.text.push('\n');
        self.fresh.push(l);
    }

    /// Appends raw EEG, returning the `(offset, count)` reference in values.
    pub fn eeg(&mut self, values: &[f32]) -> (u64, u64) {
        let offset = (self.log.eeg.len() / 4) as u64;
        self.log.eeg.extend(sidecar::encode(values));
        (offset, values.len() as u64)
    }

    pub fn seal(&mut self) {
        let h = digest(&self.chain, &self.log.text.as_bytes()[self.seg_text..], &self.log.eeg[self.seg_eeg..]);
        let total = self.log.eeg.len() / 4;
        self.line(format!("HSH\t{h}\t{total}"));
        self.chain = h;
        self.seg_text = self.log.text.len();
        self.seg_eeg = self.log.eeg.len();
    }

    /// Lines of the current, unsealed segment.
    pub fn open_segment(&self) -> &str {
        &self.log.text[self.seg_text..]
    }

    pub fn take_fresh(&mut self) -> Vec<String> {
        std::mem::take(&mut self.fresh)
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn into_log(self) -> SessionLog {
        self.log
    }
}

pub(crate) fn header_lines(scenario: &Scenario, seed_set: &str, seeds: &SeedSet, model_digest: Option<&str>) -> Vec<String> {
    vec![
        format!("{LOG_MAGIC}\t{LOG_VERSION}\t{}\t{seed_set}", scenario.hash()),
        format!("SCN\t{}", serde_json::to_string(&scenario.to_toml()).expect("string serializes")),
        format!("SEEDS\t{}", serde_json::to_string(seeds).expect("seeds serialize")),
        format!("MODEL\t{}", model_digest.unwrap_or("-")),
    ]
}

pub(crate) fn msg_line(session: u32, arrival: f64, msg: &TelemetryMessage, w: &mut LogWriter) -> String {
    let payload = if msg.kind == SensorKind::Eeg {
        let channels = msg.payload.first().map_or(0, Vec::len);
        let frames: Vec<f32> = msg.payload.iter().flatten().map(|v| *v as f32).collect();
        let (offset, count) = w.eeg(&sidecar::to_channel_major(&frames, channels));
        WirePayload::Sidecar { offset, count }
    } else {
        WirePayload::Inline
    };
    format!("MSG\t{session}\t{}\t{}", f6(arrival), encode_message(msg, &payload))
}

pub(crate) fn evt_line(session: u32, e: &FeedbackEvent) -> String {
    format!("EVT\t{session}\t{}\t{}\t{}\t{}", f6(e.ts), e.kind.as_str(), e.place_id.as_deref().unwrap_or("-"), e.rationale.as_str())
}

/// A classifier output as delivered to the phone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClsRecord {
    pub ts: f64,
    pub window: usize,
    pub window_start_ts: f64,
    pub label: AttentionLabel,
    pub confidence: f64,
}

pub(crate) fn cls_line(session: u32, c: &ClsRecord) -> String {
    format!("CLS\t{session}\t{}\t{}\t{}\t{}\t{}", f6(c.ts), c.window, f6(c.window_start_ts), c.label.as_str(), f6(c.confidence))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmdRecord {
    pub ts: f64,
    pub command: String,
    pub applied: bool,
    pub reason: Option<String>,
}

/// Everything recorded for one session, with EEG payloads resolved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionRaw {
    pub index: u32,
    pub messages: Vec<TelemetryMessage>,
    pub events: Vec<FeedbackEvent>,
    pub classifications: Vec<ClsRecord>,
    pub disturbances: Vec<(f64, String)>,
    pub acks: Vec<(f64, String)>,
    pub commands: Vec<CmdRecord>,
    /// Derived lines as recorded.
    pub derived: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub scenario: Scenario,
    pub scenario_hash: String,
    pub seed_set: String,
    pub seeds: SeedSet,
    pub model_digest: Option<String>,
    pub sessions: Vec<SessionRaw>,
}

fn corrupt(m: impl Into<String>) -> HarnessError {
    HarnessError::CorruptLog(m.into())
}

/// Splits the log into verified segments. Any truncation, edit or sidecar
/// mismatch is reported as corrupt.
pub(crate) fn verify_segments(log: &SessionLog) -> Result<Vec<Vec<&str>>, HarnessError> {
    if !log.text.ends_with('\n') {
        return Err(corrupt("log does not end with a complete line"));
    }
    if !log.eeg.len().is_multiple_of(4) {
        return Err(corrupt("sidecar length is not a whole number of values"));
    }
    let mut segments = Vec::new();
    let mut current = Vec::new();
    let (mut chain, mut seg_start, mut eeg_start) = (String::new(), 0usize, 0usize);
    let mut pos = 0usize;
    for line in log.text.split_inclusive('\n') {
        let l = line.trim_end_matches('\n');
        if let Some(rest) = l.strip_prefix("HSH\t") {
            let (h, total) = rest.split_once('\t').ok_or_else(|| corrupt("malformed HSH record"))?;
            let total: usize = total.parse().map_err(|_| corrupt("malformed HSH record"))?;
            let eeg_end =
                total.checked_mul(4).filter(|e| *e <= log.eeg.len() && *e >= eeg_start).ok_or_else(|| corrupt("sidecar is shorter than the log expects"))?;
            let expect = digest(&chain, &log.text.as_bytes()[seg_start..pos], &log.eeg[eeg_start..eeg_end]);
            if expect != h {
                return Err(corrupt(format!("segment {} fails its hash check", segments.len())));
            }
            chain = expect;
            eeg_start = eeg_end;
            segments.push(std::mem::take(&mut current));
            pos += line.len();
            seg_start = pos;
            continue;
        }
        current.push(l);
        pos += line.len();
    }
    if !current.is_empty() {
        return Err(corrupt("log ends inside an unsealed segment"));
    }
    if eeg_start != log.eeg.len() {
        return Err(corrupt("sidecar has trailing data"));
    }
    match segments.last() {
        Some(last) if last.first().is_some_and(|l| l.starts_with("END\t")) => {}
        _ => return Err(corrupt("log has no END record")),
    }
    if segments.len() < 2 {
        return Err(corrupt("log has no header"));
    }
    Ok(segments)
}

fn num(s: &str) -> Result<f64, HarnessError> {
    s.parse().map_err(|_| corrupt(format!("bad number {s:?}")))
}

fn fields(line: &str, n: usize) -> Result<Vec<&str>, HarnessError> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != n {
        return Err(corrupt(format!("expected {n} fields: {line:?}")));
    }
    Ok(f)
}

fn parse_header(seg: &[&str]) -> Result<(Scenario, String, String, SeedSet, Option<String>), HarnessError> {
    let [magic, scn, seeds, model] = seg else { return Err(corrupt("malformed header segment")) };
    let m = fields(magic, 4)?;
    if m[0] != LOG_MAGIC || m[1] != LOG_VERSION.to_string() {
        return Err(corrupt("not an ACTA log of a supported version"));
    }
    let toml_text: String =
        serde_json::from_str(scn.strip_prefix("SCN\t").ok_or_else(|| corrupt("missing SCN record"))?).map_err(|e| corrupt(e.to_string()))?;
    let scenario = Scenario::from_toml(&toml_text).map_err(|e| corrupt(format!("embedded scenario: {e}")))?;
    if scenario.hash() != m[2] {
        return Err(corrupt("scenario hash mismatch"));
    }
    let seeds: SeedSet =
        serde_json::from_str(seeds.strip_prefix("SEEDS\t").ok_or_else(|| corrupt("missing SEEDS record"))?).map_err(|e| corrupt(e.to_string()))?;
    let model = model.strip_prefix("MODEL\t").ok_or_else(|| corrupt("missing MODEL record"))?;
    Ok((scenario, m[2].to_string(), m[3].to_string(), seeds, (model != "-").then(|| model.to_string())))
}

/// Parses the records of one session segment.
pub(crate) fn parse_session(lines: &[&str], eeg: &[u8], channels: usize) -> Result<SessionRaw, HarnessError> {
    let mut raw = SessionRaw::default();
    let mut derived = false;
    for line in lines {
        let tag = line.split('\t').next().unwrap_or("");
        let session: u32 = line.split('\t').nth(1).and_then(|s| s.parse().ok()).ok_or_else(|| corrupt(format!("missing session index: {line:?}")))?;
        if raw.index == 0 {
            raw.index = session;
        } else if raw.index != session {
            return Err(corrupt("records of two sessions in one segment"));
        }
        match tag {
            "WIN" | "BEH" | "EVL" | "MET" => {
                derived = true;
                raw.derived.push(line.to_string());
                continue;
            }
            _ if derived => return Err(corrupt(format!("raw record after derived records: {line:?}"))),
            _ => {}
        }
        match tag {
            "MSG" => {
                let f: Vec<&str> = line.splitn(4, '\t').collect();
                if f.len() != 4 {
                    return Err(corrupt(format!("malformed MSG: {line:?}")));
                }
                let (mut msg, wire) = decode_message(f[3]).map_err(|e| corrupt(e.to_string()))?;
                if let WirePayload::Sidecar { offset, count } = wire {
                    let (a, b) = (offset as usize * 4, (offset + count) as usize * 4);
                    let bytes = eeg.get(a..b).ok_or_else(|| corrupt("sidecar reference out of range"))?;
                    let values = sidecar::decode(bytes).map_err(|e| corrupt(e.to_string()))?;
                    if channels == 0 || values.len() % channels != 0 {
                        return Err(corrupt("sidecar batch does not match the channel count"));
                    }
                    let frames = values.len() / channels;
                    msg.payload = (0..frames).map(|i| (0..channels).map(|c| values[c * frames + i] as f64).collect()).collect();
                }
                raw.messages.push(msg);
            }
            "EVT" => {
                let f = fields(line, 6)?;
                raw.events.push(FeedbackEvent {
                    ts: num(f[2])?,
                    kind: FeedbackKind::parse(f[3]).ok_or_else(|| corrupt(format!("bad feedback kind {:?}", f[3])))?,
                    place_id: (f[4] != "-").then(|| f[4].to_string()),
                    rationale: Rationale::parse(f[5]).ok_or_else(|| corrupt(format!("bad rationale {:?}", f[5])))?,
                });
            }
            "CLS" => {
                let f = fields(line, 7)?;
                raw.classifications.push(ClsRecord {
                    ts: num(f[2])?,
                    window: f[3].parse().map_err(|_| corrupt("bad window index"))?,
                    window_start_ts: num(f[4])?,
                    label: AttentionLabel::parse(f[5]).ok_or_else(|| corrupt("bad label"))?,
                    confidence: num(f[6])?,
                });
            }
            "DST" => {
                let f = fields(line, 6)?;
                raw.disturbances.push((num(f[2])?, f[3].to_string()));
            }
            "ACK" => {
                let f = fields(line, 4)?;
                raw.acks.push((num(f[2])?, f[3].to_string()));
            }
            "CMD" => {
                let f = fields(line, 6)?;
                raw.commands.push(CmdRecord {
                    ts: num(f[2])?,
                    command: f[3].to_string(),
                    applied: f[4] == "applied",
                    reason: (f[5] != "-").then(|| f[5].to_string()),
                });
            }
            "SES" | "SYN" | "BAT" | "TRN" | "CNT" => {}
            _ => return Err(corrupt(format!("unknown record {tag:?}"))),
        }
    }
    Ok(raw)
}

/// Verifies and parses a whole log.
pub fn parse_log(log: &SessionLog) -> Result<ParsedLog, HarnessError> {
    let segments = verify_segments(log)?;
    let (scenario, scenario_hash, seed_set, seeds, model_digest) = parse_header(&segments[0])?;
    let channels = scenario.eeg.channels.len();
    let body = &segments[1..segments.len() - 1];
    let end = fields(segments[segments.len() - 1][0], 2)?;
    if end[1].parse::<usize>().ok() != Some(body.len()) {
        return Err(corrupt("END record disagrees with the number of sessions"));
    }
    let sessions = body.iter().map(|seg| parse_session(seg, &log.eeg, channels)).collect::<Result<Vec<_>, _>>()?;
    Ok(ParsedLog { scenario, scenario_hash, seed_set, seeds, model_digest, sessions })
}
