use serde::{Deserialize, Serialize};

use super::{DisturbanceSpec, Phase, ProtocolError};
use crate::geo::{BehavioralReport, PathSpec};

/// Completion rate at or above which the remaining nudges are thinned.
pub const ADJUST_HIGH_COMPLETION: f64 = 0.9;
/// Completion rate below which nudges are restored.
pub const ADJUST_LOW_COMPLETION: f64 = 0.5;
pub const ADJUST_DECREASE_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub path_id: String,
    pub phase: Phase,
    /// 1-based.
    pub session_index: u32,
    pub n_sessions: u32,
    /// Per-landmark nudge probability, landmark order.
    pub nudge_probability: Vec<f64>,
    /// The schedule's values for the previous session (session 1: itself).
    pub prior_probability: Vec<f64>,
    pub disturbances: Vec<DisturbanceSpec>,
    consumed: Vec<bool>,
    /// Last session of phase 2: neurofeedback only.
    pub pure_nfb: bool,
    active: bool,
}

impl SessionPlan {
    pub fn is_final(&self) -> bool {
        self.session_index == self.n_sessions
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn activate(&mut self) {
        self.active = true;
    }

    pub fn with_disturbances(mut self, disturbances: Vec<DisturbanceSpec>) -> Self {
        self.consumed = vec![false; disturbances.len()];
        self.disturbances = disturbances;
        self
    }

    pub fn add_disturbance(&mut self, d: DisturbanceSpec) {
        self.disturbances.push(d);
        self.consumed.push(false);
    }

    /// Removes a not-yet-delivered disturbance. Returns whether it existed.
    pub fn cancel_disturbance(&mut self, id: &str) -> bool {
        match self.disturbances.iter().zip(&self.consumed).position(|(d, c)| d.id == id && !c) {
            Some(i) => {
                self.disturbances.remove(i);
                self.consumed.remove(i);
                true
            }
            None => false,
        }
    }
}

/// Vanishing-cue schedule: every landmark is nudged in session 1, none in the
/// last session, linear in between.
pub fn plan_sessions(path: &PathSpec, n_sessions: u32, phase: Phase) -> Result<Vec<SessionPlan>, ProtocolError> {
    if n_sessions < 2 {
        return Err(ProtocolError::TooFewSessions(n_sessions));
    }
    let k = path.landmarks().len();
    let prob = |s: u32| 1.0 - (s - 1) as f64 / (n_sessions - 1) as f64;
    Ok((1..=n_sessions)
        .map(|s| SessionPlan {
            path_id: path.id().to_string(),
            phase,
            session_index: s,
            n_sessions,
            nudge_probability: vec![prob(s); k],
            prior_probability: vec![prob(s.saturating_sub(1).max(1)); k],
            disturbances: Vec::new(),
            consumed: Vec::new(),
            pure_nfb: phase == Phase::ClosedLoopNfb && s == n_sessions,
            active: false,
        })
        .collect())
}

/// Performance-driven adjustment of a not-yet-started plan. The first and
/// last sessions keep their fixed endpoints.
pub fn adjust_plan(plan: &SessionPlan, performance: &BehavioralReport) -> Result<SessionPlan, ProtocolError> {
    if plan.active {
        return Err(ProtocolError::PlanAlreadyActive(plan.session_index));
    }
    let mut out = plan.clone();
    if plan.session_index == 1 || plan.is_final() {
        return Ok(out);
    }
    let c = performance.completion_rate;
    if c >= ADJUST_HIGH_COMPLETION {
        out.nudge_probability.iter_mut().for_each(|p| *p = (*p * ADJUST_DECREASE_FACTOR).max(0.0));
    } else if c < ADJUST_LOW_COMPLETION {
        for (p, prev) in out.nudge_probability.iter_mut().zip(&plan.prior_probability) {
            *p = p.max(*prev).min(1.0);
        }
    }
    Ok(out)
}

/// Disturbances whose trigger offset has elapsed; each is returned once.
pub fn inject_disturbances(plan: &mut SessionPlan, now: f64) -> Vec<DisturbanceSpec> {
    let mut due = Vec::new();
    for (d, consumed) in plan.disturbances.iter().zip(plan.consumed.iter_mut()) {
        if !*consumed && d.trigger_ts_offset_s <= now {
            *consumed = true;
            due.push(d.clone());
        }
    }
    due
}
