//! The session engine: one discrete-event loop per session over sensor
//! emissions, link deliveries, gateway flushes, cloud arrivals, classifier
//! outputs, position fixes and participant acknowledgments.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::derive::{assemble_window, derive_session, derived_lines, empty_dataset, session_records, standard_feature_names, window_seqs, SessionDerived};
use super::log::{cls_line, evt_line, header_lines, msg_line, parse_session, ClsRecord, LogWriter, SessionLog};
use super::ops::{BatteryReading, CommandAck, OpsCommand, Snapshot};
use super::scenario::{mix, Scenario, SeedSet};
use super::walker::simulate_walker;
use super::{runtime, HarnessError};
use crate::geo::{is_within, GeoPoint, PathSpec, Trajectory};
use crate::learner::{retrain_schedule, train, AttentionModel, Classifier, Dataset, MIN_RECORDS_PER_CLASS};
use crate::network::{metric_series, MetricRow};
use crate::par::Execution;
use crate::pipeline::des::EventQueue;
use crate::pipeline::wire::f6;
use crate::pipeline::{
    estimate_offset, Cloud, ForwardedBatch, GatewayState, Link, SensorAgent, SensorKind, StreamInfo, TelemetryMessage, AGGREGATION_WINDOW_S,
};
use crate::protocol::{
    adjust_plan, inject_disturbances, on_classification, on_position, plan_sessions, CaseCPolicy, Classification, EncounterState, FeedbackEvent, FeedbackKind,
    Phase, Rationale, SessionPlan,
};
use crate::signal::{extract_features, generate_eeg, AttentionProfile, Band, EegStream, FeatureVector};
use crate::AttentionLabel;

/// Sensors keep streaming this long after the walker arrives.
const TAIL_S: f64 = 2.0;
/// Resolution of the ground-truth attention indicator.
const ATTENTION_STEP_S: f64 = 0.1;
const BATTERY_REPORT_S: f64 = 60.0;
const STEP_LENGTH_M: f64 = 0.7;
const GRAVITY: f64 = 9.81;
const GAIT_AMPLITUDE: f64 = 2.5;
const RESTING_HR: f64 = 70.0;
const ATTENTION_HR_DELTA: f64 = 6.0;
/// A window whose messages are still missing once the cloud holds data
/// this much later is given up.
const WINDOW_GIVE_UP_S: f64 = 2.0;
const RECENT_EVENTS: usize = 50;
const RECENT_SERIES: usize = 240;

#[derive(Debug, Clone, Default)]
pub struct EngineOptions {
    pub exec: Execution,
    /// Compute graph metrics for every window as it reaches the cloud, for
    /// the live state. The log's metric series does not depend on it.
    pub live_metrics: bool,
    /// Phase 2: records the semi-supervised updates are added to.
    pub base_dataset: Option<Dataset>,
}

/// Per-sensor message accounting for one session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorCounters {
    pub emitted: u64,
    /// Lost between wearable and phone.
    pub link_dropped: u64,
    /// Lost between phone and cloud.
    pub uplink_dropped: u64,
    /// Arrived at the phone after being declared missing.
    pub late_dropped: u64,
    pub duplicates: u64,
    pub stored: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub plan: SessionPlan,
    pub events: Vec<FeedbackEvent>,
    pub counters: BTreeMap<String, SensorCounters>,
    pub derived: SessionDerived,
    pub classifications: Vec<ClsRecord>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: SessionLog,
    /// Phase 1: every GPS-labeled window. Phase 2: the base dataset plus
    /// the semi-supervised records.
    pub dataset: Dataset,
    pub sessions: Vec<SessionSummary>,
    /// The classifier in use at the end of the run.
    pub model: Option<AttentionModel>,
}

#[derive(Debug)]
enum Ev {
    Emit(usize),
    GatewayArrival(TelemetryMessage),
    Flush,
    CloudArrival(ForwardedBatch),
    Classified(ClsRecord),
    Position(usize),
    Ack(String),
    Battery,
    End,
}

enum Frames {
    Eeg(EegStream),
    Series(Vec<Vec<f64>>),
}

impl Frames {
    fn frame(&self, i: u64) -> Vec<f64> {
        let i = i as usize;
        match self {
            Frames::Eeg(s) if i < s.len() => s.frame(i).map(f64::from).collect(),
            Frames::Eeg(s) => vec![0.0; s.channels.len()],
            Frames::Series(v) => v.get(i).or(v.last()).cloned().unwrap_or_default(),
        }
    }
}

struct Rig {
    agent: SensorAgent,
    /// `None` for the phone's own sensors.
    link: Option<Link>,
    frames: Frames,
    counters: SensorCounters,
}

struct Live {
    session: u32,
    session_id: String,
    plan: SessionPlan,
    traj: Trajectory,
    stop_s: f64,
    end_s: f64,
    queue: EventQueue<Ev>,
    rigs: Vec<Rig>,
    gateway: GatewayState,
    uplink: Link,
    uplink_free_at: f64,
    downlink: Link,
    cloud: Cloud,
    state: EncounterState,
    rng: ChaCha8Rng,
    participant: ChaCha8Rng,
    next_window: usize,
    features: BTreeMap<usize, FeatureVector>,
    ended: bool,
    events: Vec<FeedbackEvent>,
    classifications: Vec<ClsRecord>,
}

pub struct Engine {
    scenario: Scenario,
    seed_set: String,
    seeds: SeedSet,
    model: Option<AttentionModel>,
    options: EngineOptions,
    plans: Vec<SessionPlan>,
    policy: CaseCPolicy,
    writer: LogWriter,
    live: Option<Live>,
    next_session: u32,
    finished: bool,
    now: f64,
    paused: bool,
    dataset: Dataset,
    trained_on: usize,
    summaries: Vec<SessionSummary>,
    queued_commands: Vec<String>,
    recent_events: VecDeque<(u32, FeedbackEvent)>,
    confidence: VecDeque<(f64, f64)>,
    live_metrics: VecDeque<MetricRow>,
    position: Option<GeoPoint>,
}

pub(crate) fn model_digest(m: &AttentionModel) -> String {
    hex::encode(Sha256::digest(m.to_json().as_bytes()))
}

/// Ground truth: attending exactly while inside a landmark geofence.
fn attention_profile(traj: &Trajectory, path: &PathSpec, sim: &super::AttentionSim) -> AttentionProfile {
    let (_, end) = traj.span().expect("walker trajectory is never empty");
    let inside = |t: f64| traj.position_at(t.min(end)).is_some_and(|p| path.landmarks().iter().any(|lm| is_within(&p, lm)));
    let mut segments = vec![(0.0, inside(0.0))];
    let steps = (end / ATTENTION_STEP_S).ceil() as usize;
    for k in 1..=steps {
        let t = k as f64 * ATTENTION_STEP_S;
        let now = inside(t);
        if now != segments.last().unwrap().1 {
            segments.push((t, now));
        }
    }
    AttentionProfile { segments, depths: sim.depths, rhythms: sim.rhythms }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

impl Engine {
    pub fn new(scenario: Scenario, seed_set: &str, model: Option<AttentionModel>, mut options: EngineOptions) -> Result<Engine, HarnessError> {
        scenario.validate()?;
        let seeds = scenario.seed_set(seed_set)?;
        let names = standard_feature_names(&scenario.eeg);
        let model = match scenario.phase {
            Phase::OpenLoopNudges => None,
            Phase::ClosedLoopNfb => {
                let m = model.ok_or(HarnessError::ModelMissing)?;
                if m.feature_names != names {
                    return Err(HarnessError::ModelMismatch(format!("model features {:?} differ from the scenario's {:?}", m.feature_names, names)));
                }
                Some(m)
            }
        };
        let dataset = match options.base_dataset.take() {
            Some(d) if d.feature_names != names => return Err(HarnessError::ModelMismatch("base dataset features differ from the scenario's".into())),
            Some(d) => d,
            None => empty_dataset(&scenario),
        };
        let plans = plan_sessions(&scenario.path, scenario.n_sessions, scenario.phase)
            .map_err(|e| HarnessError::ScenarioInvalid(e.to_string()))?
            .into_iter()
            .map(|p| p.with_disturbances(scenario.task2.clone()))
            .collect();
        let mut writer = LogWriter::default();
        for l in header_lines(&scenario, seed_set, &seeds, model.as_ref().map(model_digest).as_deref()) {
            writer.line(l);
        }
        writer.seal();
        let trained_on = model.as_ref().map_or(0, |m| m.meta.semi_supervised_seen);
        Ok(Engine {
            policy: scenario.case_c_policy,
            scenario,
            seed_set: seed_set.to_string(),
            seeds,
            model,
            options,
            plans,
            writer,
            live: None,
            next_session: 1,
            finished: false,
            now: 0.0,
            paused: false,
            dataset,
            trained_on,
            summaries: Vec::new(),
            queued_commands: Vec::new(),
            recent_events: VecDeque::new(),
            confidence: VecDeque::new(),
            live_metrics: VecDeque::new(),
            position: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    /// Session-relative simulated time of the last processed event.
    pub fn now(&self) -> f64 {
        self.now
    }

    /// 1-based index of the running session, if any.
    pub fn current_session(&self) -> Option<u32> {
        self.live.as_ref().map(|l| l.session)
    }

    /// Time of the next queued event of the running session.
    pub fn next_event_time(&self) -> Option<f64> {
        self.live.as_ref().and_then(|l| l.queue.peek_time())
    }

    pub fn encounter_in_progress(&self) -> bool {
        self.live.as_ref().is_some_and(|l| l.state.encounter_in_progress())
    }

    pub fn log(&self) -> &SessionLog {
        self.writer.log()
    }

    /// Log lines written since the previous call.
    pub fn take_new_records(&mut self) -> Vec<String> {
        self.writer.take_fresh()
    }

    /// Processes one event, or starts/finishes a session. Returns `false`
    /// once the run is complete.
    pub fn step(&mut self) -> Result<bool, HarnessError> {
        if self.finished {
            return Ok(false);
        }
        let Some(mut live) = self.live.take() else {
            if self.next_session > self.scenario.n_sessions {
                self.writer.line(format!("END\t{}", self.scenario.n_sessions));
                self.writer.seal();
                self.finished = true;
                return Ok(false);
            }
            self.live = Some(self.start_session(self.next_session)?);
            return Ok(true);
        };
        match live.queue.pop() {
            Some((t, ev)) => {
                self.now = t;
                self.handle(&mut live, t, ev)?;
                self.live = Some(live);
            }
            None => {
                self.finish_session(live)?;
                self.next_session += 1;
            }
        }
        Ok(true)
    }

    /// Runs to completion.
    pub fn run(mut self) -> Result<RunOutput, HarnessError> {
        while self.step()? {}
        Ok(self.into_output())
    }

    pub fn into_output(self) -> RunOutput {
        RunOutput { log: self.writer.into_log(), dataset: self.dataset, sessions: self.summaries, model: self.model }
    }

    /// Per-session stream seed. The phase is mixed in so a phase-2 run
    /// never replays the signals its classifier was trained on.
    fn seed(&self, base: u64, session: u32, stream: u64) -> u64 {
        let phase = match self.scenario.phase {
            Phase::OpenLoopNudges => 1,
            Phase::ClosedLoopNfb => 2,
        };
        mix(base, phase << 40 | (session as u64) << 8 | stream)
    }

    fn start_session(&mut self, s: u32) -> Result<Live, HarnessError> {
        let idx = s as usize - 1;
        let sc = &self.scenario;
        let mut pre = std::mem::take(&mut self.queued_commands);
        if s > 1 && sc.phase == Phase::ClosedLoopNfb && retrain_schedule(&self.dataset, &sc.retrain, self.trained_on, true) {
            if let Some(line) = self.retrain(s)? {
                pre.push(line);
            }
        }
        let mut plan = match self.summaries.last() {
            Some(prev) => adjust_plan(&self.plans[idx], &prev.derived.behavior).map_err(runtime)?,
            None => self.plans[idx].clone(),
        };
        plan.activate();
        for l in pre {
            self.writer.line(l);
        }
        let plan_json = serde_json::json!({
            "nudge_probability": plan.nudge_probability,
            "pure_nfb": plan.pure_nfb,
            "case_c_policy": self.policy.as_str(),
            "disturbances": plan.disturbances.iter().map(|d| d.id.clone()).collect::<Vec<_>>(),
        });
        self.writer.line(format!("SES\t{s}\tstart\t{plan_json}"));
        self.now = 0.0;

        let sc = &self.scenario;
        let seeds = self.seeds;
        let traj = simulate_walker(&sc.path, &sc.walker, sc.sensors.gps_hz, self.seed(seeds.walker, s, 0));
        let arrival = traj.span().expect("non-empty trajectory").1;
        let stop_s = arrival + TAIL_S;
        let profile = attention_profile(&traj, &sc.path, &sc.attention);
        let eeg = generate_eeg(&sc.eeg, &profile, stop_s + 1.0, self.seed(seeds.eeg, s, 0));

        let mut sig = ChaCha8Rng::seed_from_u64(self.seed(seeds.eeg, s, 1));
        let hr_n = (stop_s * sc.sensors.hr_hz).ceil() as usize + 2;
        let hr: Vec<Vec<f64>> = (0..hr_n)
            .map(|i| {
                let t = i as f64 / sc.sensors.hr_hz;
                let bump = if profile.is_attending(t) { ATTENTION_HR_DELTA } else { 0.0 };
                let noise: f64 = sig.sample(StandardNormal);
                vec![RESTING_HR + bump + noise]
            })
            .collect();
        let acc_hz = sc.sensors.accel_hz;
        let acc_n = (stop_s * acc_hz).ceil() as usize + sc.sensors.accel_batch + 1;
        let cadence = sc.walker.speed_mps / STEP_LENGTH_M;
        let acc: Vec<Vec<f64>> = (0..acc_n)
            .map(|i| {
                let t = i as f64 / acc_hz;
                let gait = if t < arrival { GAIT_AMPLITUDE * (2.0 * PI * cadence * t).sin() } else { 0.0 };
                let noise: f64 = sig.sample(StandardNormal);
                vec![GRAVITY + gait + 0.2 * noise]
            })
            .collect();
        let gps_n = (stop_s * sc.sensors.gps_hz).ceil() as usize + 2;
        let last = traj.samples().last().expect("non-empty").pos;
        let gps: Vec<Vec<f64>> = (0..gps_n)
            .map(|i| {
                let p = traj.position_at(i as f64 / sc.sensors.gps_hz).unwrap_or(last);
                vec![p.lat(), p.lon()]
            })
            .collect();

        let b = &sc.sensors.batteries;
        let specs = [
            ("eeg", SensorKind::Eeg, sc.eeg.fs_hz, sc.sensors.eeg_batch, b.eeg_headset, true),
            ("hr", SensorKind::HeartRate, sc.sensors.hr_hz, 1, b.smartwatch, true),
            ("gps", SensorKind::Gps, sc.sensors.gps_hz, 1, b.smartphone, false),
            ("accel", SensorKind::Accel, acc_hz, sc.sensors.accel_batch, b.smartphone, false),
        ];
        let mut frames = vec![Frames::Eeg(eeg), Frames::Series(hr), Frames::Series(gps), Frames::Series(acc)].into_iter();
        let mut clock = ChaCha8Rng::seed_from_u64(self.seed(seeds.links, s, 100));
        let mut gateway = GatewayState::new();
        let mut streams = Vec::new();
        let mut rigs = Vec::new();
        let mut sync_lines = Vec::new();
        for (i, (id, kind, rate, batch, battery, wearable)) in specs.into_iter().enumerate() {
            let mut agent = SensorAgent::new(id, kind, rate, batch, battery.state()?).map_err(runtime)?;
            let mut link = None;
            if wearable {
                let off = sc.sensors.clock_offset_max_s * (2.0 * clock.random::<f64>() - 1.0);
                let ppm = sc.sensors.clock_drift_max_ppm * (2.0 * clock.random::<f64>() - 1.0);
                agent = agent.with_clock(off, ppm);
                let mut l = Link::new(sc.links.sensor_gateway, self.seed(seeds.links, s, i as u64)).map_err(runtime)?;
                let (d1, d2) = (l.delay(), l.delay());
                let at_sensor = agent.device_time(d1);
                let est = estimate_offset(0.0, at_sensor, d1 + d2).map_err(runtime)?;
                gateway.set_offset(id, kind, est);
                sync_lines.push(format!("SYN\t{s}\t{id}\t{}\t{}\t{}\t{}", f6(0.0), f6(at_sensor), f6(d1 + d2), f6(est)));
                link = Some(l);
            } else {
                gateway.register(id, kind);
            }
            streams.push((id.to_string(), StreamInfo { kind, rate_hz: rate, batch }));
            rigs.push(Rig { agent, link, frames: frames.next().expect("one per sensor"), counters: SensorCounters::default() });
        }
        for l in sync_lines {
            self.writer.line(l);
        }
        let session_id = format!("{}-s{s}", sc.participant.id);
        let mut cloud = Cloud::new();
        cloud.open_session(&session_id, &streams);

        let max_delay = (sc.links.sensor_gateway.latency_ms + sc.links.sensor_gateway.jitter_ms) / 1000.0;
        let end_s = stop_s + 1.0_f64.max(2.0 * max_delay + AGGREGATION_WINDOW_S);
        let mut queue = EventQueue::new();
        for (i, r) in rigs.iter().enumerate() {
            let t = r.agent.send_time(1);
            if t <= stop_s {
                queue.push(t, Ev::Emit(i));
            }
        }
        for (i, p) in traj.samples().iter().enumerate() {
            queue.push(p.t, Ev::Position(i));
        }
        queue.push(AGGREGATION_WINDOW_S, Ev::Flush);
        queue.push(0.0, Ev::Battery);
        queue.push(end_s, Ev::End);

        Ok(Live {
            session: s,
            session_id,
            state: EncounterState::new(&sc.path),
            plan,
            traj,
            stop_s,
            end_s,
            queue,
            rigs,
            gateway,
            uplink: Link::new(sc.links.gateway_cloud, self.seed(seeds.links, s, 6)).map_err(runtime)?,
            uplink_free_at: 0.0,
            downlink: Link::new(sc.links.gateway_cloud, self.seed(seeds.links, s, 7)).map_err(runtime)?,
            cloud,
            rng: ChaCha8Rng::seed_from_u64(self.seed(seeds.protocol, s, 0)),
            participant: ChaCha8Rng::seed_from_u64(self.seed(seeds.protocol, s, 1)),
            next_window: 0,
            features: BTreeMap::new(),
            ended: false,
            events: Vec::new(),
            classifications: Vec::new(),
        })
    }

    fn handle(&mut self, live: &mut Live, t: f64, ev: Ev) -> Result<(), HarnessError> {
        match ev {
            Ev::Emit(i) => {
                let rig = &mut live.rigs[i];
                let Rig { agent, frames, link, counters } = rig;
                let em = agent.emit(t, &mut |k| frames.frame(k)).map_err(runtime)?;
                for m in em.messages {
                    counters.emitted += 1;
                    match link {
                        Some(l) => match l.transmit(m, t) {
                            Some((at, m)) => live.queue.push(at, Ev::GatewayArrival(m)),
                            None => counters.link_dropped += 1,
                        },
                        None => live.queue.push(t, Ev::GatewayArrival(m)),
                    }
                }
                if let Some(at) = em.exhausted_at {
                    let id = rig.agent.id.clone();
                    self.writer.line(format!("BAT\t{}\t{}\t{id}\t{}\texhausted", live.session, f6(at), f6(0.0)));
                } else {
                    let next = rig.agent.send_time(rig.agent.seq + 1);
                    if next <= live.stop_s {
                        live.queue.push(next, Ev::Emit(i));
                    }
                }
            }
            Ev::GatewayArrival(m) => {
                live.gateway.ingest(m, t);
                if live.ended {
                    let batches = live.gateway.drain(t);
                    self.uplink(live, t, batches);
                }
            }
            Ev::Flush => {
                let batches = live.gateway.flush(t);
                self.uplink(live, t, batches);
                let next = t + AGGREGATION_WINDOW_S;
                if next < live.end_s {
                    live.queue.push(next, Ev::Flush);
                }
            }
            Ev::CloudArrival(batch) => self.cloud_arrival(live, t, batch)?,
            Ev::Classified(c) => {
                self.writer.line(cls_line(live.session, &c));
                live.classifications.push(c);
                self.confidence.push_back((t, c.confidence));
                if self.confidence.len() > RECENT_SERIES {
                    self.confidence.pop_front();
                }
                if !live.ended && live.state.is_active() {
                    let cl = Classification { label: c.label, confidence: c.confidence, window_start_ts: c.window_start_ts };
                    let evs = on_classification(&mut live.state, &cl, t, &self.scenario.path, self.policy).map_err(runtime)?;
                    let fv = live.features.get(&c.window).cloned();
                    self.record_events(live, evs, fv.as_ref())?;
                }
            }
            Ev::Position(i) => {
                let pos = live.traj.samples()[i].pos;
                self.position = Some(pos);
                if live.state.is_active() {
                    let evs = on_position(&mut live.state, &pos, t, &live.plan, &self.scenario.path, None, self.policy, &mut live.rng).map_err(runtime)?;
                    self.record_events(live, evs, None)?;
                }
                for d in inject_disturbances(&mut live.plan, t) {
                    self.writer.line(format!("DST\t{}\t{}\t{}\t{}\t{}", live.session, f6(t), d.id, json(&d.kind).trim_matches('"'), json(&d.payload)));
                    let latency = 0.5 + live.participant.random::<f64>() * (d.response_deadline_s.min(4.0) - 0.5).max(0.0);
                    live.queue.push(t + latency, Ev::Ack(d.id));
                }
            }
            Ev::Ack(id) => self.writer.line(format!("ACK\t{}\t{}\t{id}", live.session, f6(t))),
            Ev::Battery => {
                for r in &live.rigs {
                    let mut b = r.agent.battery;
                    b.draw_until(t - r.agent.start_s);
                    let status = if b.is_exhausted() { "exhausted" } else { "ok" };
                    self.writer.line(format!("BAT\t{}\t{}\t{}\t{}\t{status}", live.session, f6(t), r.agent.id, f6(b.remaining_fraction())));
                }
                let next = t + BATTERY_REPORT_S;
                if next < live.end_s {
                    live.queue.push(next, Ev::Battery);
                }
            }
            Ev::End => {
                let pending: Vec<String> = live.state.pending().map(|(id, _)| id.to_string()).collect();
                let evs = pending
                    .into_iter()
                    .map(|place| FeedbackEvent { ts: t, kind: FeedbackKind::NoOp, place_id: Some(place), rationale: Rationale::Unclassified })
                    .collect();
                self.record_events(live, evs, None)?;
                live.state.deactivate();
                live.ended = true;
                let batches = live.gateway.drain(t);
                self.uplink(live, t, batches);
            }
        }
        Ok(())
    }

    /// The phone-to-cloud connection delivers in order.
    fn uplink(&mut self, live: &mut Live, t: f64, batches: Vec<ForwardedBatch>) {
        for b in batches {
            let n = b.messages.len() as u64;
            let idx = live.rigs.iter().position(|r| r.agent.id == b.sensor_id).expect("known sensor");
            match live.uplink.transmit(b, t) {
                Some((at, b)) => {
                    let at = at.max(live.uplink_free_at);
                    live.uplink_free_at = at;
                    live.queue.push(at, Ev::CloudArrival(b));
                }
                None => live.rigs[idx].counters.uplink_dropped += n,
            }
        }
    }

    fn cloud_arrival(&mut self, live: &mut Live, t: f64, batch: ForwardedBatch) -> Result<(), HarnessError> {
        let fresh: Vec<&TelemetryMessage> = {
            let stream = live.cloud.stream(&live.session_id, &batch.sensor_id).map_err(runtime)?;
            batch.messages.iter().filter(|m| stream.is_none_or(|s| !s.messages.contains_key(&m.seq))).collect()
        };
        for m in fresh {
            let l = msg_line(live.session, t, m, &mut self.writer);
            self.writer.line(l);
        }
        live.cloud.store(&live.session_id, &batch).map_err(runtime)?;
        if batch.kind == SensorKind::Eeg {
            self.process_windows(live, t)?;
        }
        Ok(())
    }

    /// Assembles every EEG window that has become complete, in order, and
    /// classifies it in phase 2.
    fn process_windows(&mut self, live: &mut Live, t: f64) -> Result<(), HarnessError> {
        let sc = &self.scenario;
        let batch = sc.sensors.eeg_batch;
        let give_up = (WINDOW_GIVE_UP_S * sc.eeg.fs_hz / batch as f64).ceil() as u64;
        loop {
            let stream = live.cloud.stream(&live.session_id, "eeg").map_err(runtime)?.expect("eeg stream is open");
            let Some(&max_seq) = stream.messages.keys().next_back() else { return Ok(()) };
            let k = live.next_window;
            let (lo, hi) = window_seqs(k, &sc.eeg, batch);
            let window = if hi <= max_seq { assemble_window(k, &stream.messages, &sc.eeg, batch) } else { None };
            let lost = window.is_none() && ((lo..=hi).any(|q| stream.gaps.contains(&q)) || max_seq >= hi + give_up);
            if window.is_none() && !lost {
                return Ok(());
            }
            live.next_window += 1;
            let Some(w) = window else { continue };
            if self.options.live_metrics {
                let series =
                    metric_series(std::slice::from_ref(&w), &sc.eeg.channels, sc.graph_threshold, mix(self.seeds.learner, k as u64), Execution::Sequential);
                self.live_metrics.extend(series.rows);
                while self.live_metrics.len() > RECENT_SERIES {
                    self.live_metrics.pop_front();
                }
            }
            let Some(model) = &self.model else { continue };
            let fv = extract_features(&w, &sc.eeg, &Band::standard()).map_err(runtime)?;
            let p = model.classify(&fv).map_err(runtime)?;
            live.features.insert(k, fv);
            if let Some((at, ())) = live.downlink.transmit((), t) {
                let c = ClsRecord { ts: at, window: k, window_start_ts: w.start_ts, label: p.label, confidence: p.confidence };
                live.queue.push(at, Ev::Classified(c));
            }
        }
    }

    fn record_events(&mut self, live: &mut Live, evs: Vec<FeedbackEvent>, fv: Option<&FeatureVector>) -> Result<(), HarnessError> {
        for e in evs {
            self.writer.line(evt_line(live.session, &e));
            if let (Some(fv), true) = (fv, e.is_nfb()) {
                self.dataset.apply_feedback(fv, &e, live.session).map_err(runtime)?;
            }
            self.recent_events.push_back((live.session, e.clone()));
            if self.recent_events.len() > RECENT_EVENTS {
                self.recent_events.pop_front();
            }
            live.events.push(e);
        }
        Ok(())
    }

    fn finish_session(&mut self, mut live: Live) -> Result<(), HarnessError> {
        let s = live.session;
        let mut counters = BTreeMap::new();
        for r in &live.rigs {
            let g = live.gateway.counters(&r.agent.id).unwrap_or_default();
            let stored = live.cloud.stream(&live.session_id, &r.agent.id).map_err(runtime)?.map_or(0, |st| st.messages.len() as u64);
            let c = SensorCounters { late_dropped: g.late_dropped, duplicates: g.duplicates, stored, ..r.counters };
            self.writer.line(format!(
                "CNT\t{s}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.agent.id, c.emitted, c.link_dropped, c.uplink_dropped, c.late_dropped, c.duplicates, c.stored
            ));
            counters.insert(r.agent.id.clone(), c);
        }
        self.writer.line(format!("SES\t{s}\tend\t{}", f6(self.now)));

        let lines: Vec<&str> = self.writer.open_segment().lines().collect();
        let raw = parse_session(&lines, &self.writer.log().eeg, self.scenario.eeg.channels.len())?;
        let (derived, windows) = derive_session(&raw, &self.scenario, &self.seeds, self.options.exec);
        for l in derived_lines(&derived) {
            self.writer.line(l);
        }
        self.writer.seal();
        if self.scenario.phase == Phase::OpenLoopNudges {
            for r in session_records(&windows, &self.scenario, s, self.options.exec) {
                self.dataset.push(r).map_err(runtime)?;
            }
        }
        live.plan.activate();
        self.summaries.push(SessionSummary { plan: live.plan, events: live.events, counters, derived, classifications: live.classifications });
        Ok(())
    }

    /// Retrains on the current dataset when both classes are represented
    /// well enough. Returns the `TRN` record.
    fn retrain(&mut self, s: u32) -> Result<Option<String>, HarnessError> {
        let enough = [AttentionLabel::Attention, AttentionLabel::NonAttention].iter().all(|l| self.dataset.count(*l) >= MIN_RECORDS_PER_CLASS);
        if !enough {
            return Ok(None);
        }
        let m = train(&self.dataset, &self.scenario.training, mix(self.seeds.learner, s as u64)).map_err(runtime)?;
        self.trained_on = m.meta.semi_supervised_seen;
        let line = format!("TRN\t{s}\t{}\t{}\t{}", m.meta.n_records, m.meta.semi_supervised_seen, model_digest(&m));
        self.model = Some(m);
        Ok(Some(line))
    }

    fn plan_mut(&mut self) -> Option<&mut SessionPlan> {
        match &mut self.live {
            Some(l) => Some(&mut l.plan),
            None => self.plans.get_mut(self.next_session as usize - 1),
        }
    }

    /// Applies an operator command at the current event boundary. Accepted
    /// and rejected commands are both recorded.
    pub fn command(&mut self, cmd: &OpsCommand) -> CommandAck {
        if self.finished || self.next_session > self.scenario.n_sessions {
            return CommandAck::rejected(cmd, "the run has finished");
        }
        let result = self.apply(cmd);
        let (applied, reason) = match &result {
            Ok(()) => ("applied", "-".to_string()),
            Err(r) => ("rejected", r.replace(['\t', '\n'], " ")),
        };
        let session = self.current_session().unwrap_or(self.next_session);
        let ts = if self.live.is_some() { self.now } else { 0.0 };
        let line = format!("CMD\t{session}\t{}\t{}\t{applied}\t{reason}", f6(ts), json(cmd));
        if self.live.is_some() {
            self.writer.line(line);
        } else {
            self.queued_commands.push(line);
        }
        match result {
            Ok(()) => CommandAck::applied(cmd, session, ts),
            Err(r) => CommandAck::rejected(cmd, &r),
        }
    }

    fn apply(&mut self, cmd: &OpsCommand) -> Result<(), String> {
        let in_encounter = self.encounter_in_progress();
        let protocol_change = matches!(
            cmd,
            OpsCommand::SetNudgeProbability { .. }
                | OpsCommand::ScheduleDisturbance { .. }
                | OpsCommand::CancelDisturbance { .. }
                | OpsCommand::SetCaseCPolicy { .. }
        );
        if protocol_change && in_encounter {
            return Err("an encounter is in progress".into());
        }
        match cmd {
            OpsCommand::SetNudgeProbability { landmark, probability } => {
                if !(0.0..=1.0).contains(probability) {
                    return Err(format!("probability {probability} is outside [0, 1]"));
                }
                let plan = self.plan_mut().ok_or("no session to adjust")?;
                if plan.is_final() {
                    return Err("the final session delivers no nudges".into());
                }
                match landmark {
                    None => plan.nudge_probability.iter_mut().for_each(|p| *p = *probability),
                    Some(k) if *k >= 1 && (*k as usize) <= plan.nudge_probability.len() => plan.nudge_probability[*k as usize - 1] = *probability,
                    Some(k) => return Err(format!("no landmark with index {k}")),
                }
            }
            OpsCommand::ScheduleDisturbance { disturbance } => {
                if !(disturbance.trigger_ts_offset_s >= 0.0 && disturbance.response_deadline_s > 0.0) {
                    return Err("disturbance needs a non-negative trigger and a positive deadline".into());
                }
                let plan = self.plan_mut().ok_or("no session to adjust")?;
                if plan.disturbances.iter().any(|d| d.id == disturbance.id) {
                    return Err(format!("disturbance {} already exists", disturbance.id));
                }
                plan.add_disturbance(disturbance.clone());
            }
            OpsCommand::CancelDisturbance { id } => {
                let plan = self.plan_mut().ok_or("no session to adjust")?;
                if !plan.cancel_disturbance(id) {
                    return Err(format!("no pending disturbance {id}"));
                }
            }
            OpsCommand::SetCaseCPolicy { policy } => self.policy = *policy,
            OpsCommand::Pause => self.paused = true,
            OpsCommand::Resume => self.paused = false,
            OpsCommand::Retrain => {
                if self.live.is_some() {
                    return Err("retraining is not allowed during a session".into());
                }
                if self.scenario.phase != Phase::ClosedLoopNfb {
                    return Err("there is no classifier in phase 1".into());
                }
                let s = self.next_session;
                match self.retrain(s).map_err(|e| e.to_string())? {
                    Some(line) => self.queued_commands.push(line),
                    None => return Err("not enough labeled records to retrain".into()),
                }
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let plan = self.live.as_ref().map(|l| &l.plan).or_else(|| self.plans.get(self.next_session as usize - 1));
        let battery = self
            .live
            .as_ref()
            .map(|l| {
                l.rigs
                    .iter()
                    .map(|r| {
                        let mut b = r.agent.battery;
                        b.draw_until(self.now - r.agent.start_s);
                        BatteryReading { sensor: r.agent.id.clone(), remaining: b.remaining_fraction(), exhausted: b.is_exhausted() }
                    })
                    .collect()
            })
            .unwrap_or_default();
        Snapshot {
            scenario: self.scenario.name.clone(),
            seed_set: self.seed_set.clone(),
            phase: self.scenario.phase,
            n_sessions: self.scenario.n_sessions,
            session: self.current_session().unwrap_or(self.next_session.min(self.scenario.n_sessions)),
            session_active: self.live.is_some(),
            finished: self.finished,
            paused: self.paused,
            sim_time_s: self.now,
            position: self.position,
            encounter_in_progress: self.encounter_in_progress(),
            nudge_probability: plan.map(|p| p.nudge_probability.clone()).unwrap_or_default(),
            case_c_policy: self.policy,
            recent_events: self.recent_events.iter().cloned().collect(),
            battery,
            confidence: self.confidence.iter().copied().collect(),
            metrics: self.live_metrics.iter().copied().collect(),
            model: self.model.as_ref().map(|m| super::ops::ModelView { feature_names: m.feature_names.clone(), weights: m.weights.clone(), bias: m.bias }),
            path: self.scenario.path.clone(),
        }
    }
}

/// Phase 1: vanishing-cue nudges, EEG collected and labeled from GPS.
pub fn run_phase1(scenario: &Scenario, seed_set: &str) -> Result<(SessionLog, Dataset), HarnessError> {
    let out = run_phase1_with(scenario, seed_set, EngineOptions::default())?;
    Ok((out.log, out.dataset))
}

pub(crate) fn run_phase1_with(scenario: &Scenario, seed_set: &str, options: EngineOptions) -> Result<RunOutput, HarnessError> {
    if scenario.phase != Phase::OpenLoopNudges {
        return Err(HarnessError::ScenarioInvalid("phase 1 needs phase = \"open_loop_nudges\"".into()));
    }
    Engine::new(scenario.clone(), seed_set, None, options)?.run()
}

/// Phase 2: the classifier drives neurofeedback while nudges vanish.
pub fn run_phase2(scenario: &Scenario, seed_set: &str, model: Option<AttentionModel>, options: EngineOptions) -> Result<RunOutput, HarnessError> {
    if scenario.phase != Phase::ClosedLoopNfb {
        return Err(HarnessError::ScenarioInvalid("phase 2 needs phase = \"closed_loop_nfb\"".into()));
    }
    Engine::new(scenario.clone(), seed_set, model, options)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::demo::small_scenario;
    use crate::harness::replay;

    fn phase1() -> Scenario {
        small_scenario(Phase::OpenLoopNudges)
    }

    fn run(sc: &Scenario, seeds: &str) -> RunOutput {
        Engine::new(sc.clone(), seeds, None, EngineOptions::default()).unwrap().run().unwrap()
    }

    #[test]
    fn same_seeds_same_bytes() {
        let sc = phase1();
        let (a, b) = (run(&sc, "default"), run(&sc, "default"));
        assert_eq!(a.log, b.log);
        assert_ne!(run(&sc, "alt").log.text, a.log.text);
        replay(&a.log).unwrap();
    }

    #[test]
    fn phase1_has_no_neurofeedback_and_labels_both_classes() {
        let out = run(&phase1(), "default");
        assert_eq!(out.sessions.len(), 3);
        assert!(out.sessions.iter().flat_map(|s| &s.events).all(|e| !e.is_nfb()));
        assert!(out.dataset.count(AttentionLabel::Attention) > 0);
        assert!(out.dataset.count(AttentionLabel::NonAttention) > 0);
        assert_eq!(out.log.records("CLS").count(), 0);
    }

    #[test]
    fn message_accounting_under_loss() {
        let mut sc = phase1();
        sc.links.sensor_gateway.loss_rate = 0.1;
        sc.links.gateway_cloud.loss_rate = 0.1;
        let out = run(&sc, "default");
        for s in &out.sessions {
            for (id, c) in &s.counters {
                assert!(c.emitted > 0, "{id}");
                assert_eq!(c.emitted, c.stored + c.link_dropped + c.uplink_dropped + c.late_dropped, "{id}: {c:?}");
            }
            assert!(s.counters["eeg"].link_dropped > 0);
            assert_eq!(s.counters["gps"].link_dropped, 0);
        }
        replay(&out.log).unwrap();
    }

    #[test]
    fn phase2_needs_a_matching_model() {
        let sc = small_scenario(Phase::ClosedLoopNfb);
        let e = Engine::new(sc.clone(), "default", None, EngineOptions::default()).err().unwrap();
        assert_eq!(e, HarnessError::ModelMissing);
        assert!(matches!(Engine::new(sc, "nope", None, EngineOptions::default()), Err(HarnessError::UnknownSeedSet(_))));
    }

    #[test]
    fn commands_are_applied_rejected_and_logged() {
        let mut e = Engine::new(phase1(), "default", None, EngineOptions::default()).unwrap();
        assert!(e.command(&OpsCommand::SetNudgeProbability { landmark: None, probability: 0.0 }).applied);
        assert!(!e.command(&OpsCommand::SetNudgeProbability { landmark: Some(9), probability: 0.5 }).applied);
        assert!(!e.command(&OpsCommand::SetNudgeProbability { landmark: None, probability: 1.5 }).applied);
        assert!(!e.command(&OpsCommand::Retrain).applied);
        let mut rejected_mid_encounter = false;
        while e.step().unwrap() {
            if e.current_session() == Some(1) && e.encounter_in_progress() && !rejected_mid_encounter {
                let ack = e.command(&OpsCommand::SetCaseCPolicy { policy: CaseCPolicy::DeliverNudge });
                assert!(!ack.applied);
                rejected_mid_encounter = true;
            }
        }
        assert!(rejected_mid_encounter);
        assert!(!e.command(&OpsCommand::Pause).applied);
        let out = e.into_output();
        let cmds: Vec<&str> = out.log.records("CMD").collect();
        assert_eq!(cmds.len(), 5);
        assert!(cmds[0].contains("\tapplied\t"));
        assert!(cmds[4].contains("encounter"));
        assert!(out.sessions[0].events.iter().all(|ev| ev.kind != FeedbackKind::Nudge));
        replay(&out.log).unwrap();
    }

    #[test]
    fn certain_nudges_fire_at_every_landmark() {
        let mut e = Engine::new(phase1(), "default", None, EngineOptions::default()).unwrap();
        assert!(e.command(&OpsCommand::SetNudgeProbability { landmark: None, probability: 1.0 }).applied);
        let out = e.run().unwrap();
        let nudged: Vec<_> = out.sessions[0].events.iter().filter(|ev| ev.kind == FeedbackKind::Nudge).filter_map(|ev| ev.place_id.clone()).collect();
        assert_eq!(nudged, vec!["bakery", "square", "cafe"]);
    }

    #[test]
    fn disturbances_are_injected_and_acknowledged() {
        let mut sc = phase1();
        sc.task2 = vec![crate::protocol::DisturbanceSpec {
            id: "q1".into(),
            trigger_ts_offset_s: 30.0,
            kind: crate::protocol::DisturbanceKind::AuditoryQuestion,
            payload: "what did you pass?".into(),
            response_deadline_s: 10.0,
        }];
        let out = run(&sc, "default");
        assert_eq!(out.log.records("DST").count(), 3);
        assert_eq!(out.log.records("ACK").count(), 3);
        for s in &out.sessions {
            let rt = &s.derived.behavior.reaction_times_s;
            assert_eq!(rt.len(), 1);
            assert!(rt[0].seconds.is_some_and(|x| x > 0.0 && x <= 10.0));
        }
    }
}
