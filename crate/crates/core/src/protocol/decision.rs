use serde::{Deserialize, Serialize};

use super::{FeedbackKind, Rationale};
use crate::AttentionLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    Landmark,
    NonRelevant,
    Neither,
}

/// What to do when the classifier disagrees with the walker's location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseCPolicy {
    #[default]
    NoOp,
    DeliverNudge,
}

impl CaseCPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseCPolicy::NoOp => "no_op",
            CaseCPolicy::DeliverNudge => "deliver_nudge",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "no_op" => Some(CaseCPolicy::NoOp),
            "deliver_nudge" => Some(CaseCPolicy::DeliverNudge),
            _ => None,
        }
    }
}

/// Phase-2 feedback table. Neurofeedback is only considered when no nudge
/// fired for the encounter.
pub fn decide_feedback(location: LocationClass, label: AttentionLabel, nudge_fired: bool, policy: CaseCPolicy) -> (FeedbackKind, Rationale) {
    use AttentionLabel::*;
    use LocationClass::*;
    if nudge_fired {
        return (FeedbackKind::NoOp, Rationale::NoIntervention);
    }
    match (location, label) {
        (Landmark, Attention) => (FeedbackKind::NfbEncourage, Rationale::CaseA),
        (NonRelevant, NonAttention) => (FeedbackKind::NfbReinforce, Rationale::CaseB),
        (Landmark, NonAttention) | (NonRelevant, Attention) => match policy {
            CaseCPolicy::NoOp => (FeedbackKind::NoOp, Rationale::CaseCNoIntervention),
            CaseCPolicy::DeliverNudge => (FeedbackKind::Nudge, Rationale::CaseCIntervention),
        },
        (Neither, _) => (FeedbackKind::NoOp, Rationale::NoIntervention),
    }
}
