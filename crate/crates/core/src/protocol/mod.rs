//! Training protocol: session planning with vanishing cues, the per-session
//! encounter state machine, disturbance injection and the phase-2 feedback
//! decision table.

mod decision;
mod machine;
mod plan;

pub use decision::{decide_feedback, CaseCPolicy, LocationClass};
pub use machine::{on_classification, on_position, Classification, EncounterState, Latch};
pub use plan::{adjust_plan, inject_disturbances, plan_sessions, SessionPlan, ADJUST_DECREASE_FACTOR, ADJUST_HIGH_COMPLETION, ADJUST_LOW_COMPLETION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("at least 2 sessions are required, got {0}")]
    TooFewSessions(u32),
    #[error("session plan {0} has already started")]
    PlanAlreadyActive(u32),
    #[error("unknown place {0}")]
    UnknownPlace(String),
    #[error("session is not active")]
    SessionNotActive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Phase 1: nudges only, EEG collected for training.
    OpenLoopNudges,
    /// Phase 2: the trained classifier drives neurofeedback.
    ClosedLoopNfb,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::OpenLoopNudges => "open_loop_nudges",
            Phase::ClosedLoopNfb => "closed_loop_nfb",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "open_loop_nudges" => Some(Phase::OpenLoopNudges),
            "closed_loop_nfb" => Some(Phase::ClosedLoopNfb),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    AuditoryQuestion,
}

/// A stimulus injected during a session to provoke an attentional shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    pub id: String,
    pub trigger_ts_offset_s: f64,
    pub kind: DisturbanceKind,
    pub payload: String,
    pub response_deadline_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    Nudge,
    /// Case (a): attention detected near a landmark.
    NfbEncourage,
    /// Case (b): no attention while passing a non-relevant place.
    NfbReinforce,
    Reward,
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    Scheduled,
    CaseA,
    CaseB,
    CaseCNoIntervention,
    CaseCIntervention,
    DestinationReached,
    /// Nothing to deliver: phase 1 without a scheduled nudge, a place that is
    /// neither landmark nor non-relevant, or a nudge already covered it.
    NoIntervention,
    /// The walker left the place before a classification became available.
    Unclassified,
}

macro_rules! str_enum {
    ($ty:ty { $($v:ident => $s:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(<$ty>::$v => $s),+ }
            }
            pub fn parse(s: &str) -> Option<Self> {
                match s { $($s => Some(<$ty>::$v),)+ _ => None }
            }
        }
    };
}

str_enum!(FeedbackKind {
    Nudge => "nudge",
    NfbEncourage => "nfb_encourage",
    NfbReinforce => "nfb_reinforce",
    Reward => "reward",
    NoOp => "no_op",
});

str_enum!(Rationale {
    Scheduled => "scheduled",
    CaseA => "case_a",
    CaseB => "case_b",
    CaseCNoIntervention => "case_c_no_intervention",
    CaseCIntervention => "case_c_intervention",
    DestinationReached => "destination_reached",
    NoIntervention => "no_intervention",
    Unclassified => "unclassified",
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub ts: f64,
    pub kind: FeedbackKind,
    pub place_id: Option<String>,
    pub rationale: Rationale,
}

impl FeedbackEvent {
    pub fn is_nfb(&self) -> bool {
        matches!(self.kind, FeedbackKind::NfbEncourage | FeedbackKind::NfbReinforce)
    }
}
