//! Desk-scale simulation of a closed-loop nudge and neurofeedback training
//! system for walking-based cognitive training.
//!
//! A synthetic participant walks a landmark route. Wearable sensors stream
//! through a sensor → gateway → cloud telemetry pipeline, EEG windows are
//! labeled from GPS proximity to train an attention classifier (phase 1), and
//! the trained classifier then drives neurofeedback in place of vanishing
//! nudges (phase 2).
//!
//! Module map:
//!
//! - [`geo`]: great-circle geometry, routes, geofences, behavioral metrics.
//! - [`protocol`]: session planning, vanishing-cue schedule, the per-session
//!   encounter state machine and the feedback decision table.
//! - [`signal`]: synthetic EEG, windowing, band power, GPS-driven labeling.
//! - [`network`]: correlation brain graphs and graph-theory metrics.
//! - [`learner`]: datasets and the logistic attention classifier.
//! - [`pipeline`]: sensor agents, lossy links, gateway, cloud store, wire format.
//! - [`harness`]: scenarios, the seeded session engine, logs, replay, ops.
//! - [`par`]: the data-parallel execution switch used by the heavy loops.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod geo;
pub mod harness;
pub mod learner;
pub mod network;
pub mod par;
pub mod pipeline;
pub mod protocol;
pub mod signal;

/// Binary attention state used for window labels and classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum AttentionLabel {
    Attention,
    NonAttention,
}

impl AttentionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AttentionLabel::Attention => "attention",
            AttentionLabel::NonAttention => "non_attention",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "attention" => Some(AttentionLabel::Attention),
            "non_attention" => Some(AttentionLabel::NonAttention),
            _ => None,
        }
    }

    pub fn is_attention(self) -> bool {
        matches!(self, AttentionLabel::Attention)
    }
}

impl std::fmt::Display for AttentionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
