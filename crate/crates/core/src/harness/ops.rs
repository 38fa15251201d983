//! Operator API: commands, live state, and a paced engine thread that a
//! web front end can poll and steer.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::engine::{Engine, RunOutput};
use super::HarnessError;
use crate::geo::{GeoPoint, PathSpec};
use crate::network::MetricRow;
use crate::protocol::{CaseCPolicy, DisturbanceSpec, FeedbackEvent, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpsCommand {
    /// `landmark` is the 1-based landmark index; `None` sets all of them.
    SetNudgeProbability {
        #[serde(default)]
        landmark: Option<u32>,
        probability: f64,
    },
    ScheduleDisturbance {
        disturbance: DisturbanceSpec,
    },
    CancelDisturbance {
        id: String,
    },
    SetCaseCPolicy {
        policy: CaseCPolicy,
    },
    Pause,
    Resume,
    Retrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandAck {
    pub command: OpsCommand,
    pub applied: bool,
    pub reason: Option<String>,
    pub session: Option<u32>,
    pub ts: Option<f64>,
}

impl CommandAck {
    pub(crate) fn applied(cmd: &OpsCommand, session: u32, ts: f64) -> CommandAck {
        CommandAck { command: cmd.clone(), applied: true, reason: None, session: Some(session), ts: Some(ts) }
    }

    pub(crate) fn rejected(cmd: &OpsCommand, reason: &str) -> CommandAck {
        CommandAck { command: cmd.clone(), applied: false, reason: Some(reason.to_string()), session: None, ts: None }
    }

    pub fn into_result(self) -> Result<CommandAck, HarnessError> {
        match (&self.applied, &self.reason) {
            (false, Some(r)) => Err(HarnessError::CommandRejected(r.clone())),
            _ => Ok(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReading {
    pub sensor: String,
    pub remaining: f64,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelView {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Everything the operator console shows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scenario: String,
    pub seed_set: String,
    pub phase: Phase,
    pub n_sessions: u32,
    pub session: u32,
    pub session_active: bool,
    pub finished: bool,
    pub paused: bool,
    pub sim_time_s: f64,
    pub position: Option<GeoPoint>,
    pub encounter_in_progress: bool,
    pub nudge_probability: Vec<f64>,
    pub case_c_policy: CaseCPolicy,
    /// `(session, event)`, oldest first.
    pub recent_events: Vec<(u32, FeedbackEvent)>,
    pub battery: Vec<BatteryReading>,
    /// `(ts, confidence)` of recent classifier outputs.
    pub confidence: Vec<(f64, f64)>,
    pub metrics: Vec<MetricRow>,
    pub model: Option<ModelView>,
    pub path: PathSpec,
}

type CommandMsg = (OpsCommand, Sender<CommandAck>);

/// Handle to an engine running on its own thread.
pub struct OpsHandle {
    commands: Sender<CommandMsg>,
    snapshot: Arc<Mutex<Snapshot>>,
    /// `None` once the run has ended.
    subscribers: Arc<Mutex<Option<Vec<Sender<String>>>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<Result<RunOutput, HarnessError>>>,
}

impl OpsHandle {
    /// Applies a command at the next event boundary and waits for the
    /// outcome.
    pub fn command(&self, cmd: OpsCommand) -> CommandAck {
        let (tx, rx) = mpsc::channel();
        if self.commands.send((cmd.clone(), tx)).is_err() {
            return CommandAck::rejected(&cmd, "the run has finished");
        }
        rx.recv().unwrap_or_else(|_| CommandAck::rejected(&cmd, "the run has finished"))
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.lock().expect("snapshot lock").clone()
    }

    /// Every log record written from now on. The channel closes when the
    /// run ends.
    pub fn subscribe(&self) -> Receiver<String> {
        let (tx, rx) = mpsc::channel();
        if let Some(subs) = self.subscribers.lock().expect("subscriber lock").as_mut() {
            subs.push(tx);
        }
        rx
    }

    pub fn is_finished(&self) -> bool {
        self.thread.as_ref().is_none_or(|t| t.is_finished())
    }

    /// Waits for the run to end.
    pub fn join(mut self) -> Result<RunOutput, HarnessError> {
        let t = self.thread.take().expect("joined once");
        t.join().map_err(|_| HarnessError::Runtime("engine thread panicked".into()))?
    }

    /// Halts the engine at the next event boundary. The output of an
    /// unfinished run holds an incomplete log.
    pub fn stop(self) -> Result<RunOutput, HarnessError> {
        self.stop.store(true, Ordering::Relaxed);
        self.join()
    }
}

const POLL: Duration = Duration::from_millis(20);

/// Runs `engine` on a background thread, advancing `pace` simulated seconds
/// per wall-clock second. A non-finite or non-positive pace runs unthrottled.
pub fn spawn_paced(mut engine: Engine, pace: f64) -> OpsHandle {
    let (tx, rx) = mpsc::channel::<CommandMsg>();
    let snapshot = Arc::new(Mutex::new(engine.snapshot()));
    let subscribers = Arc::new(Mutex::new(Some(Vec::<Sender<String>>::new())));
    let (snap, subs) = (snapshot.clone(), subscribers.clone());
    let throttled = pace.is_finite() && pace > 0.0;
    let stop = Arc::new(AtomicBool::new(false));
    let halt = stop.clone();

    let thread = std::thread::spawn(move || {
        let publish = |engine: &mut Engine| {
            let lines = engine.take_new_records();
            if !lines.is_empty() {
                if let Some(s) = subs.lock().expect("subscriber lock").as_mut() {
                    s.retain(|tx| lines.iter().all(|l| tx.send(l.clone()).is_ok()));
                }
            }
            *snap.lock().expect("snapshot lock") = engine.snapshot();
        };
        // Publish before replying so an acknowledged command is already
        // visible in the snapshot.
        let handle_cmd = |engine: &mut Engine, (cmd, reply): CommandMsg| {
            let ack = engine.command(&cmd);
            publish(engine);
            let _ = reply.send(ack);
        };
        // Wall clock and simulated time at the last re-anchoring.
        let mut anchor: Option<(Instant, Option<u32>, f64)> = None;
        while !halt.load(Ordering::Relaxed) {
            while let Ok(m) = rx.try_recv() {
                handle_cmd(&mut engine, m);
            }
            if engine.is_paused() {
                anchor = None;
                if let Ok(m) = rx.recv_timeout(POLL) {
                    handle_cmd(&mut engine, m);
                }
                continue;
            }
            if throttled {
                if let Some(t) = engine.next_event_time() {
                    let session = engine.current_session();
                    let (wall, s, sim) = *anchor.get_or_insert((Instant::now(), session, engine.now()));
                    if s != session {
                        anchor = None;
                        continue;
                    }
                    let due = wall + Duration::from_secs_f64(((t - sim) / pace).max(0.0));
                    let now = Instant::now();
                    if due > now {
                        if let Ok(m) = rx.recv_timeout((due - now).min(POLL)) {
                            handle_cmd(&mut engine, m);
                        }
                        continue;
                    }
                }
            }
            match engine.step() {
                Ok(true) => publish(&mut engine),
                Ok(false) => {
                    publish(&mut engine);
                    break;
                }
                Err(e) => {
                    publish(&mut engine);
                    *subs.lock().expect("subscriber lock") = None;
                    return Err(e);
                }
            }
        }
        drop(rx);
        // Ends every subscriber stream.
        *subs.lock().expect("subscriber lock") = None;
        Ok(engine.into_output())
    });
    OpsHandle { commands: tx, snapshot, subscribers, stop, thread: Some(thread) }
}
