use serde::Serialize;

use super::derive::{derive_session, derived_lines, SessionDerived};
use super::log::{parse_log, SessionLog};
use super::HarnessError;
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionCheck {
    pub session: u32,
    pub messages: usize,
    pub windows: usize,
    pub derived_records: usize,
    pub derived: SessionDerived,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub scenario: String,
    pub scenario_hash: String,
    pub seed_set: String,
    pub model_digest: Option<String>,
    pub sessions: Vec<SessionCheck>,
}

/// Verifies the log's hash chain, recomputes every derived record from the
/// logged raw streams and compares them with the recorded ones.
pub fn replay(log: &SessionLog) -> Result<ReplayReport, HarnessError> {
    replay_with(log, Execution::default())
}

pub fn replay_with(log: &SessionLog, exec: Execution) -> Result<ReplayReport, HarnessError> {
    let parsed = parse_log(log)?;
    let mut sessions = Vec::new();
    for raw in &parsed.sessions {
        let (derived, _) = derive_session(raw, &parsed.scenario, &parsed.seeds, exec);
        let fresh = derived_lines(&derived);
        if fresh.len() != raw.derived.len() {
            return Err(HarnessError::ReplayMismatch(format!("session {}: {} derived records, recomputed {}", raw.index, raw.derived.len(), fresh.len())));
        }
        if let Some((a, b)) = raw.derived.iter().zip(&fresh).find(|(a, b)| a != b) {
            return Err(HarnessError::ReplayMismatch(format!("session {}: recorded {a:?}, recomputed {b:?}", raw.index)));
        }
        sessions.push(SessionCheck { session: raw.index, messages: raw.messages.len(), windows: derived.windows.len(), derived_records: fresh.len(), derived });
    }
    Ok(ReplayReport {
        scenario: parsed.scenario.name.clone(),
        scenario_hash: parsed.scenario_hash,
        seed_set: parsed.seed_set,
        model_digest: parsed.model_digest,
        sessions,
    })
}
