//! Scenarios, participant eligibility, the walker model, the seeded session
//! engine, session logs with replay, and the operator API.
//!
//! A run is fully determined by its scenario and the chosen seed set: the
//! engine advances a discrete-event queue over simulated time and writes
//! every observable fact to an append-only [`SessionLog`]. Derived metrics
//! are recomputed from the logged raw streams, which is what makes
//! [`replay`] an exact regression oracle.

pub mod demo;
mod derive;
mod engine;
mod log;
mod ops;
mod profile;
mod replay;
mod scenario;
mod walker;

pub use derive::{gps_track, standard_feature_names, SessionDerived, WindowInfo, WindowTag};
pub use engine::{run_phase1, run_phase2, Engine, EngineOptions, RunOutput, SensorCounters, SessionSummary};
pub use log::{parse_log, ClsRecord, CmdRecord, ParsedLog, SessionLog, SessionRaw, LOG_MAGIC, LOG_VERSION};
pub use ops::{spawn_paced, BatteryReading, CommandAck, ModelView, OpsCommand, OpsHandle, Snapshot};
pub use profile::{validate_profile, Eligibility, Exclusion, Ineligibility, ParticipantProfile, MAX_AGE_YEARS, MIN_AGE_YEARS};
pub use replay::{replay, replay_with, ReplayReport, SessionCheck};
pub use scenario::{mix, AttentionSim, Batteries, BatterySpec, LinkModels, Scenario, SeedSet, SensorSetup, SCHEMA_VERSION};
pub use walker::{simulate_walker, WalkerParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("seed set {0:?} is not defined in the scenario")]
    UnknownSeedSet(String),
    #[error("phase 2 needs a trained model")]
    ModelMissing,
    #[error("model does not fit the scenario: {0}")]
    ModelMismatch(String),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("replay disagrees with the recorded {0}")]
    ReplayMismatch(String),
    #[error("command rejected: {0}")]
    CommandRejected(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("simulation failed: {0}")]
    Runtime(String),
}

impl HarnessError {
    /// Errors caused by bad input rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::ScenarioInvalid(_)
                | HarnessError::UnknownSeedSet(_)
                | HarnessError::ModelMissing
                | HarnessError::ModelMismatch(_)
                | HarnessError::CorruptLog(_)
                | HarnessError::CommandRejected(_)
        )
    }
}

fn runtime(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}
