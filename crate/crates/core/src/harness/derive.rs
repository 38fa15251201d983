//! Metrics recomputed from a session's logged raw streams. The engine runs
//! the same code on the records it has just written, so replaying a log
//! reproduces the derived records byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::log::SessionRaw;
use super::scenario::{mix, Scenario, SeedSet};
use crate::geo::GeoPoint;
use crate::geo::{completion_rate, max_path_deviation, peak_speed, reaction_time, step_count, BehavioralReport, ReactionTime, TrackPoint, Trajectory};
use crate::learner::{Dataset, EvalReport, Origin, Record};
use crate::network::{metric_series, MetricSeries};
use crate::par::Execution;
use crate::pipeline::wire::f6;
use crate::pipeline::{SensorKind, TelemetryMessage};
use crate::signal::{extract_features, feature_names, window_label, Band, EegConfig, EegWindow};
use crate::AttentionLabel;

/// Window `k` of an EEG message stream: samples `[k·hop, k·hop + win)`.
/// `None` while any covering message is absent.
pub(crate) fn assemble_window(k: usize, msgs: &BTreeMap<u64, TelemetryMessage>, config: &EegConfig, batch: usize) -> Option<EegWindow> {
    let (win, hop) = (config.window_samples(), config.hop_samples());
    let first = k * hop;
    let channels = config.channels.len();
    let mut samples = vec![Vec::with_capacity(win); channels];
    let mut start_ts = None;
    for j in first..first + win {
        let m = msgs.get(&((j / batch) as u64 + 1))?;
        let frame = m.payload.get(j % batch)?;
        if frame.len() != channels {
            return None;
        }
        if start_ts.is_none() {
            start_ts = Some(m.corrected_ts_s.unwrap_or(m.device_ts_s) + (j % batch) as f64 / config.fs_hz);
        }
        for (c, v) in frame.iter().enumerate() {
            samples[c].push(*v as f32);
        }
    }
    Some(EegWindow { start_ts: start_ts?, fs_hz: config.fs_hz, samples, label: None })
}

/// Sequence numbers of the messages covering window `k`.
pub(crate) fn window_seqs(k: usize, config: &EegConfig, batch: usize) -> (u64, u64) {
    let first = k * config.hop_samples();
    let last = first + config.window_samples() - 1;
    ((first / batch) as u64 + 1, (last / batch) as u64 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowTag {
    Attention,
    NonAttention,
    /// Crosses a landmark boundary.
    Straddle,
    /// Not covered by the received GPS track.
    Outside,
}

impl WindowTag {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowTag::Attention => "attention",
            WindowTag::NonAttention => "non_attention",
            WindowTag::Straddle => "straddle",
            WindowTag::Outside => "outside",
        }
    }

    pub fn label(self) -> Option<AttentionLabel> {
        match self {
            WindowTag::Attention => Some(AttentionLabel::Attention),
            WindowTag::NonAttention => Some(AttentionLabel::NonAttention),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub index: usize,
    pub start_ts: f64,
    pub tag: WindowTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDerived {
    pub session: u32,
    pub windows: Vec<WindowInfo>,
    pub behavior: BehavioralReport,
    /// Classifier outputs scored against the windows' GPS labels; `None`
    /// when the session has no classifier outputs.
    pub eval: Option<EvalReport>,
    pub metrics: MetricSeries,
}

/// Position track from the stored GPS samples, ordered by corrected time.
pub fn gps_track(messages: &[TelemetryMessage]) -> Trajectory {
    let mut pts: Vec<TrackPoint> = messages
        .iter()
        .filter(|m| m.kind == SensorKind::Gps)
        .flat_map(|m| m.payload.iter().map(move |v| (m.corrected_ts_s.unwrap_or(m.device_ts_s), v)))
        .filter_map(|(t, v)| Some(TrackPoint { t, pos: GeoPoint::new(*v.first()?, *v.get(1)?).ok()? }))
        .collect();
    pts.sort_by(|a, b| a.t.total_cmp(&b.t));
    pts.dedup_by(|b, a| b.t <= a.t);
    Trajectory::new(pts).expect("sorted and deduplicated")
}

fn accel_series(messages: &[TelemetryMessage], rate_hz: f64) -> Vec<(f64, f64)> {
    let mut s: Vec<(f64, f64)> = messages
        .iter()
        .filter(|m| m.kind == SensorKind::Accel)
        .flat_map(|m| {
            let base = m.corrected_ts_s.unwrap_or(m.device_ts_s);
            m.payload.iter().enumerate().filter_map(move |(i, v)| Some((base + i as f64 / rate_hz, *v.first()?)))
        })
        .collect();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    s
}

/// Windows reassembled from the stored EEG messages, with their index.
pub(crate) fn eeg_windows(raw: &SessionRaw, scenario: &Scenario) -> Vec<(usize, EegWindow)> {
    let msgs: BTreeMap<u64, TelemetryMessage> = raw.messages.iter().filter(|m| m.kind == SensorKind::Eeg).map(|m| (m.seq, m.clone())).collect();
    let Some(&max_seq) = msgs.keys().next_back() else { return Vec::new() };
    let batch = scenario.sensors.eeg_batch;
    let total = max_seq as usize * batch;
    let (win, hop) = (scenario.eeg.window_samples(), scenario.eeg.hop_samples());
    if total < win {
        return Vec::new();
    }
    (0..=(total - win) / hop).filter_map(|k| assemble_window(k, &msgs, &scenario.eeg, batch).map(|w| (k, w))).collect()
}

pub(crate) fn metrics_seed(seeds: &SeedSet, session: u32) -> u64 {
    mix(seeds.learner, 0x6d65_7472 ^ session as u64)
}

/// Derived view of one session plus its labeled windows.
pub(crate) fn derive_session(raw: &SessionRaw, scenario: &Scenario, seeds: &SeedSet, exec: Execution) -> (SessionDerived, Vec<(usize, EegWindow)>) {
    let traj = gps_track(&raw.messages);
    let path = &scenario.path;
    let mut windows = eeg_windows(raw, scenario);
    let infos: Vec<WindowInfo> = windows
        .iter_mut()
        .map(|(k, w)| {
            let tag = match window_label(w.start_ts, w.duration_s(), &traj, path) {
                Ok(Some(AttentionLabel::Attention)) => WindowTag::Attention,
                Ok(Some(AttentionLabel::NonAttention)) => WindowTag::NonAttention,
                Ok(None) => WindowTag::Straddle,
                Err(_) => WindowTag::Outside,
            };
            w.label = tag.label();
            WindowInfo { index: *k, start_ts: w.start_ts, tag }
        })
        .collect();

    let acks: BTreeMap<&str, f64> = raw.acks.iter().map(|(t, id)| (id.as_str(), *t)).collect();
    let behavior = BehavioralReport {
        path_efficiency_m: max_path_deviation(&traj, path).unwrap_or(0.0),
        peak_speed_mps: peak_speed(&traj).unwrap_or(0.0),
        reaction_times_s: raw
            .disturbances
            .iter()
            .map(|(t, id)| ReactionTime { stimulus_id: id.clone(), seconds: reaction_time(*t, &traj, acks.get(id.as_str()).copied()).ok().flatten() })
            .collect(),
        step_count: step_count(&accel_series(&raw.messages, scenario.sensors.accel_hz)),
        completion_rate: completion_rate(&traj, path, true),
    };

    let eval = (!raw.classifications.is_empty()).then(|| {
        let tags: BTreeMap<usize, WindowTag> = infos.iter().map(|i| (i.index, i.tag)).collect();
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for c in &raw.classifications {
            let Some(truth) = tags.get(&c.window).and_then(|t| t.label()) else { continue };
            match (c.label.is_attention(), truth.is_attention()) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        EvalReport::from_counts(tp, fp, tn, fn_)
    });

    let plain: Vec<EegWindow> = windows.iter().map(|(_, w)| w.clone()).collect();
    let metrics = metric_series(&plain, &scenario.eeg.channels, scenario.graph_threshold, metrics_seed(seeds, raw.index), exec);
    (SessionDerived { session: raw.index, windows: infos, behavior, eval, metrics }, windows)
}

fn opt6(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), f6)
}

pub(crate) fn derived_lines(d: &SessionDerived) -> Vec<String> {
    let s = d.session;
    let mut out: Vec<String> = d.windows.iter().map(|w| format!("WIN\t{s}\t{}\t{}\t{}", w.index, f6(w.start_ts), w.tag.as_str())).collect();
    out.push(format!("BEH\t{s}\t{}", serde_json::to_string(&d.behavior).expect("report serializes")));
    out.push(format!("EVL\t{s}\t{}", d.eval.map_or_else(|| "-".to_string(), |e| serde_json::to_string(&e).expect("report serializes"))));
    for r in &d.metrics.rows {
        out.push(format!("MET\t{s}\t{}\t{}\t{}\t{}\t{}", f6(r.ts), opt6(r.q), opt6(r.c), opt6(r.l), opt6(r.sigma)));
    }
    for g in &d.metrics.gaps {
        out.push(format!("MET\t{s}\t{}\tgap", f6(*g)));
    }
    out
}

pub fn standard_feature_names(config: &EegConfig) -> Vec<String> {
    feature_names(config, &Band::standard())
}

/// Labeled training records from one session's windows.
pub(crate) fn session_records(windows: &[(usize, EegWindow)], scenario: &Scenario, session: u32, exec: Execution) -> Vec<Record> {
    let labeled: Vec<&EegWindow> = windows.iter().map(|(_, w)| w).filter(|w| w.label.is_some()).collect();
    let bands = Band::standard();
    exec.map(&labeled, |w| {
        let fv = extract_features(w, &scenario.eeg, &bands).expect("window matches the configured channels");
        Record { fv, label: w.label.expect("filtered"), origin: Origin::Phase1, session }
    })
}

pub(crate) fn empty_dataset(scenario: &Scenario) -> Dataset {
    Dataset::new(scenario.participant.id.clone(), standard_feature_names(&scenario.eeg))
}
