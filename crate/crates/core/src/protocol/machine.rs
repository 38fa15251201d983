//! Per-session encounter state machine.
//!
//! Each place latches on the first position inside its geofence and
//! resolves at most once per session. In phase 2 an encounter without a
//! nudge stays `Approaching` until a classification of an EEG window that
//! started at or after the entry arrives, or until the walker leaves.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{decide_feedback, CaseCPolicy, FeedbackEvent, FeedbackKind, LocationClass, Phase, ProtocolError, Rationale, SessionPlan};
use crate::geo::{is_within, GeoPoint, PathSpec, Place, PlaceKind};
use crate::AttentionLabel;

/// Classifier output for one EEG window, as seen by the phone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: AttentionLabel,
    pub confidence: f64,
    pub window_start_ts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Latch {
    Unvisited,
    Approaching { entered_ts: f64 },
    Resolved { entered_ts: f64, resolved_ts: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncounterState {
    latches: BTreeMap<String, Latch>,
    inside: BTreeSet<String>,
    active: bool,
}

impl EncounterState {
    /// Fresh, active state covering every fenced place of `path`.
    pub fn new(path: &PathSpec) -> Self {
        let latches = path.places().filter(|p| !matches!(p.kind, PlaceKind::Start)).map(|p| (p.id.clone(), Latch::Unvisited)).collect();
        EncounterState { latches, inside: BTreeSet::new(), active: true }
    }

    pub fn latch(&self, place_id: &str) -> Option<Latch> {
        self.latches.get(place_id).copied()
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn deactivate(&mut self) {
        self.active = false;
    }

    /// The walker is inside a fenced place or a decision is pending.
    pub fn encounter_in_progress(&self) -> bool {
        !self.inside.is_empty() || self.latches.values().any(|l| matches!(l, Latch::Approaching { .. }))
    }

    pub fn is_resolved(&self, place_id: &str) -> bool {
        matches!(self.latches.get(place_id), Some(Latch::Resolved { .. }))
    }

    pub fn pending(&self) -> impl Iterator<Item = (&str, f64)> {
        self.latches.iter().filter_map(|(id, l)| match l {
            Latch::Approaching { entered_ts } => Some((id.as_str(), *entered_ts)),
            _ => None,
        })
    }
}

fn location_class(place: &Place) -> LocationClass {
    match place.kind {
        PlaceKind::Landmark { .. } => LocationClass::Landmark,
        PlaceKind::NonRelevant => LocationClass::NonRelevant,
        _ => LocationClass::Neither,
    }
}

fn event(ts: f64, kind: FeedbackKind, place: &Place, rationale: Rationale) -> FeedbackEvent {
    FeedbackEvent { ts, kind, place_id: Some(place.id.clone()), rationale }
}

/// Processes one position fix. Returns the feedback emitted at `ts`.
///
/// `classification` is the most recent classifier output available on the
/// phone; it is only consulted in phase 2. The RNG draws one Bernoulli
/// sample per landmark entry.
#[allow(clippy::too_many_arguments)]
pub fn on_position<R: Rng + ?Sized>(
    state: &mut EncounterState,
    pos: &GeoPoint,
    ts: f64,
    plan: &SessionPlan,
    path: &PathSpec,
    classification: Option<&Classification>,
    policy: CaseCPolicy,
    rng: &mut R,
) -> Result<Vec<FeedbackEvent>, ProtocolError> {
    if !state.active {
        return Err(ProtocolError::SessionNotActive);
    }
    let mut out = Vec::new();
    let mut finished = false;

    for place in path.places().filter(|p| !matches!(p.kind, PlaceKind::Start)) {
        let latch = *state.latches.get(&place.id).ok_or_else(|| ProtocolError::UnknownPlace(place.id.clone()))?;
        let inside = is_within(pos, place);
        let was_inside = if inside { !state.inside.insert(place.id.clone()) } else { state.inside.remove(&place.id) };

        match latch {
            Latch::Unvisited if inside => {
                let resolve_now = |state: &mut EncounterState, out: &mut Vec<FeedbackEvent>, kind, why| {
                    out.push(event(ts, kind, place, why));
                    state.latches.insert(place.id.clone(), Latch::Resolved { entered_ts: ts, resolved_ts: ts });
                };
                match place.kind {
                    PlaceKind::Destination => {
                        resolve_now(state, &mut out, FeedbackKind::Reward, Rationale::DestinationReached);
                        finished = true;
                    }
                    PlaceKind::Landmark { index } => {
                        let p = plan.nudge_probability.get(index as usize - 1).copied().unwrap_or(0.0);
                        let fired = rng.random::<f64>() < p;
                        if fired {
                            resolve_now(state, &mut out, FeedbackKind::Nudge, Rationale::Scheduled);
                        } else if plan.phase == Phase::OpenLoopNudges {
                            resolve_now(state, &mut out, FeedbackKind::NoOp, Rationale::NoIntervention);
                        } else {
                            state.latches.insert(place.id.clone(), Latch::Approaching { entered_ts: ts });
                        }
                    }
                    PlaceKind::NonRelevant => {
                        if plan.phase == Phase::OpenLoopNudges {
                            resolve_now(state, &mut out, FeedbackKind::NoOp, Rationale::NoIntervention);
                        } else {
                            state.latches.insert(place.id.clone(), Latch::Approaching { entered_ts: ts });
                        }
                    }
                    PlaceKind::Start => unreachable!("start is not fenced"),
                }
            }
            Latch::Approaching { entered_ts } if !inside && was_inside => {
                // left before a usable classification arrived
                out.push(event(ts, FeedbackKind::NoOp, place, Rationale::Unclassified));
                state.latches.insert(place.id.clone(), Latch::Resolved { entered_ts, resolved_ts: ts });
            }
            _ => {}
        }
    }

    if plan.phase == Phase::ClosedLoopNfb {
        if let Some(c) = classification {
            out.extend(on_classification(state, c, ts, path, policy)?);
        }
    }
    if finished {
        state.active = false;
    }
    Ok(out)
}

/// Resolves pending phase-2 encounters with a classification whose window
/// started at or after the entry.
pub fn on_classification(
    state: &mut EncounterState,
    classification: &Classification,
    ts: f64,
    path: &PathSpec,
    policy: CaseCPolicy,
) -> Result<Vec<FeedbackEvent>, ProtocolError> {
    let ready: Vec<(String, f64)> =
        state.pending().filter(|(_, entered)| classification.window_start_ts >= *entered).map(|(id, entered)| (id.to_string(), entered)).collect();
    let mut out = Vec::new();
    for (id, entered_ts) in ready {
        let place = path.place(&id).ok_or_else(|| ProtocolError::UnknownPlace(id.clone()))?;
        let (kind, why) = decide_feedback(location_class(place), classification.label, false, policy);
        out.push(event(ts, kind, place, why));
        state.latches.insert(id, Latch::Resolved { entered_ts, resolved_ts: ts });
    }
    Ok(out)
}
