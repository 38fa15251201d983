//! Built-in routes and scenarios used by the CLI's `init` command and the
//! test suites.

use std::collections::{BTreeMap, BTreeSet};

use super::profile::ParticipantProfile;
use super::scenario::{Scenario, SeedSet, SensorSetup, SCHEMA_VERSION};
use crate::geo::{GeoPoint, LocalFrame, PathSpec, Place, PlaceKind};
use crate::protocol::Phase;
use crate::signal::EegConfig;

fn origin() -> LocalFrame {
    LocalFrame::new(GeoPoint::new(45.4642, 9.19).expect("valid origin"))
}

fn build(id: &str, corners: &[(f64, f64)], places: &[(&str, PlaceKind, (f64, f64))], radius: f64) -> PathSpec {
    let f = origin();
    let at = |(x, y): (f64, f64)| f.to_geo(x, y);
    let place = |id: &str, kind, p| Place::new(id, kind, at(p), radius).expect("valid place");
    let start = place("start", PlaceKind::Start, corners[0]);
    let dest = place("destination", PlaceKind::Destination, *corners.last().unwrap());
    let landmarks = places.iter().filter(|p| matches!(p.1, PlaceKind::Landmark { .. })).map(|p| place(p.0, p.1, p.2)).collect();
    let others = places.iter().filter(|p| matches!(p.1, PlaceKind::NonRelevant)).map(|p| place(p.0, p.1, p.2)).collect();
    PathSpec::new(id, start, dest, landmarks, others, corners.iter().map(|c| at(*c)).collect()).expect("valid demo path")
}

/// An 850 m route with four landmarks and three non-relevant places.
pub fn demo_path() -> PathSpec {
    use PlaceKind::*;
    build(
        "demo-route",
        &[(0.0, 0.0), (0.0, 300.0), (250.0, 300.0), (250.0, 600.0)],
        &[
            ("pharmacy", Landmark { index: 1 }, (0.0, 80.0)),
            ("kiosk", NonRelevant, (0.0, 170.0)),
            ("church", Landmark { index: 2 }, (0.0, 260.0)),
            ("fountain", Landmark { index: 3 }, (150.0, 300.0)),
            ("bus-stop", NonRelevant, (250.0, 380.0)),
            ("library", Landmark { index: 4 }, (250.0, 470.0)),
            ("bench", NonRelevant, (250.0, 540.0)),
        ],
        20.0,
    )
}

/// A 400 m route with three landmarks and two non-relevant places.
pub fn small_path() -> PathSpec {
    use PlaceKind::*;
    build(
        "small-route",
        &[(0.0, 0.0), (0.0, 200.0), (200.0, 200.0)],
        &[
            ("bakery", Landmark { index: 1 }, (0.0, 60.0)),
            ("mailbox", NonRelevant, (0.0, 120.0)),
            ("square", Landmark { index: 2 }, (0.0, 185.0)),
            ("tree", NonRelevant, (80.0, 200.0)),
            ("cafe", Landmark { index: 3 }, (140.0, 200.0)),
        ],
        15.0,
    )
}

pub fn demo_participant() -> ParticipantProfile {
    ParticipantProfile { id: "P001".into(), age_years: 72, mci_diagnosed: true, informatics_entry_level: true, exclusions: BTreeSet::new() }
}

fn scenario(name: &str, phase: Phase, n_sessions: u32, path: PathSpec, eeg: EegConfig, sensors: SensorSetup) -> Scenario {
    let mut seeds = BTreeMap::new();
    seeds.insert("default".to_string(), SeedSet::from_base(1));
    seeds.insert("alt".to_string(), SeedSet::from_base(2));
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        phase,
        n_sessions,
        case_c_policy: Default::default(),
        graph_threshold: crate::network::DEFAULT_THRESHOLD,
        training: Default::default(),
        retrain: Default::default(),
        walker: Default::default(),
        eeg,
        attention: Default::default(),
        links: Default::default(),
        sensors,
        participant: demo_participant(),
        seeds,
        task2: Vec::new(),
        path,
    }
}

/// Four sessions on [`demo_path`] with the default 8-channel 250 Hz headset.
pub fn demo_scenario(phase: Phase) -> Scenario {
    scenario("demo", phase, 4, demo_path(), EegConfig::default(), SensorSetup::default())
}

/// Three sessions on [`small_path`] with a 4-channel 128 Hz headset; fast
/// enough for suites of hundreds of runs.
pub fn small_scenario(phase: Phase) -> Scenario {
    let eeg = EegConfig { channels: ["Fp1", "Fp2", "O1", "O2"].iter().map(|s| s.to_string()).collect(), fs_hz: 128.0, window_s: 2.0, overlap: 0.5 };
    let sensors = SensorSetup { eeg_batch: 16, accel_hz: 25.0, ..SensorSetup::default() };
    scenario("small", phase, 3, small_path(), eeg, sensors)
}
