//! Acceptance suite. Each section prints one `PASS`/`FAIL` line per check
//! and one for its runtime budget; the process exits non-zero on any
//! failure. Tolerances are pinned in the constants below.

#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use acta_core::geo::{haversine_distance, max_path_deviation, GeoPoint, LocalFrame, PathSpec, Place, PlaceKind, TrackPoint, Trajectory};
use acta_core::harness::demo::{demo_scenario, small_scenario};
use acta_core::harness::{
    replay, run_phase1, run_phase2, validate_profile, EngineOptions, Exclusion, Ineligibility, ParticipantProfile, RunOutput, Scenario, SeedSet,
};
use acta_core::learner::{evaluate, objective, train, AttentionModel, Dataset, Origin, Record, TrainConfig};
use acta_core::network::{char_path_length, clustering_coefficient, greedy_partition, modularity, BrainGraph};
use acta_core::par::Execution;
use acta_core::pipeline::{BatteryState, LoadProfile, SensorAgent, SensorKind};
use acta_core::protocol::{decide_feedback, CaseCPolicy, FeedbackKind, LocationClass, Phase, Rationale};
use acta_core::signal::{band_power, periodogram, Band, EegWindow, FeatureVector, ModulationDepths};
use acta_core::AttentionLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BATTERY_TOL_H: f64 = 0.01;
const PROTOCOL_RUNS_PER_PHASE: usize = 100;
const EFFICACY_SEEDS: u64 = 8;
const MIN_HELD_OUT_ACCURACY: f64 = 0.90;
const MIN_FINAL_ENCOURAGE_RATE: f64 = 0.95;
const CHANCE: f64 = 0.5;
const CHANCE_TOL: f64 = 0.10;
const ORACLE_CASES: usize = 100;
const DEVIATION_TOL_M: f64 = 0.05;
const BAND_POWER_REL_TOL: f64 = 0.01;
const PARSEVAL_REL_TOL: f64 = 1e-6;
const GRADIENT_REL_TOL: f64 = 1e-5;
const LOSS_RATES: [f64; 3] = [0.0, 0.1, 0.5];

struct Suite {
    failures: usize,
    checks: usize,
}

impl Suite {
    fn check(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
        }
        println!("{} {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    }

    fn section(&mut self, name: &str, budget: Duration, body: impl FnOnce(&mut Suite)) {
        println!("== {name}");
        let t = Instant::now();
        body(self);
        let took = t.elapsed();
        self.check(&format!("{name} runtime"), took < budget, format!("{took:.2?} (budget {budget:?})"));
    }
}

fn with_seeds(mut sc: Scenario, base: u64, n: u64) -> (Scenario, Vec<String>) {
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    for (i, name) in names.iter().enumerate() {
        sc.seeds.insert(name.clone(), SeedSet::from_base(base + i as u64));
    }
    (sc, names)
}

// ---------------------------------------------------------------- battery

fn battery(s: &mut Suite) {
    let load = LoadProfile { gps_ma: 30.0, ..Default::default() };
    let mut gps = SensorAgent::new("gps", SensorKind::Gps, 1.0, 1, BatteryState::new(100.0, load).unwrap()).unwrap();
    let mut last_sent = 0.0;
    let mut exhausted = None;
    let mut t = 0.0;
    while exhausted.is_none() && t < 24.0 * 3600.0 {
        t += 60.0;
        let e = gps.emit(t, &mut |_| vec![45.0, 9.0]).unwrap();
        if let Some(m) = e.messages.last() {
            last_sent = gps.send_time(m.seq);
        }
        exhausted = e.exhausted_at;
    }
    let expected_h = 100.0 / 30.0;
    match exhausted {
        Some(at) => {
            let h = at / 3600.0;
            s.check("gps battery exhaustion", (h - expected_h).abs() <= BATTERY_TOL_H, format!("{h:.4} h, expected {expected_h:.4} ± {BATTERY_TOL_H} h"));
            s.check("no message after exhaustion", last_sent <= at, format!("last send {last_sent:.1} s, empty at {at:.1} s"));
        }
        None => s.check("gps battery exhaustion", false, "never exhausted"),
    }
}

// --------------------------------------------------------------- protocol

/// Two-landmark-route scenario with a light 64 Hz headset, for volume.
fn protocol_scenario(phase: Phase) -> Scenario {
    let mut sc = small_scenario(phase);
    sc.eeg.fs_hz = 64.0;
    sc.sensors.eeg_batch = 16;
    sc.sensors.accel_hz = 10.0;
    sc.sensors.accel_batch = 10;
    sc
}

#[derive(Default)]
struct Tally {
    runs: usize,
    violations: Vec<String>,
}

fn protocol_violations(out: &RunOutput, phase: Phase, path: &PathSpec) -> Vec<String> {
    let mut v = Vec::new();
    let landmarks: BTreeSet<&str> = path.landmarks().iter().map(|p| p.id.as_str()).collect();
    let n = out.sessions.len();
    for (i, s) in out.sessions.iter().enumerate() {
        let idx = i + 1;
        let nudged: BTreeSet<&str> = s.events.iter().filter(|e| e.kind == FeedbackKind::Nudge).filter_map(|e| e.place_id.as_deref()).collect();
        if idx == 1 && !landmarks.iter().all(|l| nudged.contains(l)) {
            v.push(format!("session 1 nudged only {nudged:?}"));
        }
        if idx == n && !nudged.is_empty() {
            v.push(format!("final session nudged {nudged:?}"));
        }
        let mut per_place: BTreeMap<&str, Vec<FeedbackKind>> = BTreeMap::new();
        for e in &s.events {
            if phase == Phase::OpenLoopNudges && e.is_nfb() {
                v.push(format!("session {idx}: neurofeedback in phase 1"));
            }
            if let Some(p) = e.place_id.as_deref() {
                per_place.entry(p).or_default().push(e.kind);
            }
        }
        for (place, kinds) in per_place {
            let nudge = kinds.contains(&FeedbackKind::Nudge);
            let nfb = kinds.iter().any(|k| matches!(k, FeedbackKind::NfbEncourage | FeedbackKind::NfbReinforce));
            if nudge && nfb {
                v.push(format!("session {idx} {place}: neurofeedback alongside a nudge"));
            }
            let active = kinds.iter().filter(|k| **k != FeedbackKind::NoOp).count();
            if active > 1 {
                v.push(format!("session {idx} {place}: {active} non-no-op events"));
            }
        }
    }
    v
}

fn protocol(s: &mut Suite) {
    let (p1, names) = with_seeds(protocol_scenario(Phase::OpenLoopNudges), 1000, PROTOCOL_RUNS_PER_PHASE as u64);
    let (train_log, data) = run_phase1(&p1, &names[0]).unwrap();
    drop(train_log);
    let model = train(&data.balanced(1), &p1.training, 1).unwrap();
    let p2 = p1.clone().with_phase(Phase::ClosedLoopNfb);

    let exec = Execution::default();
    let results: Vec<(Phase, Result<Vec<String>, String>)> =
        exec.map(&names.iter().flat_map(|n| [(Phase::OpenLoopNudges, n), (Phase::ClosedLoopNfb, n)]).collect::<Vec<_>>(), |(phase, name)| {
            let out = match phase {
                Phase::OpenLoopNudges => {
                    acta_core::harness::Engine::new(p1.clone(), name, None, EngineOptions { exec: Execution::Sequential, ..Default::default() })
                        .and_then(|e| e.run())
                }
                Phase::ClosedLoopNfb => run_phase2(&p2, name, Some(model.clone()), EngineOptions { exec: Execution::Sequential, ..Default::default() }),
            };
            (*phase, out.map(|o| protocol_violations(&o, *phase, &p1.path)).map_err(|e| e.to_string()))
        });
    let mut tally: BTreeMap<&str, Tally> = BTreeMap::new();
    for (phase, r) in results {
        let t = tally.entry(phase.as_str()).or_default();
        t.runs += 1;
        match r {
            Ok(v) => t.violations.extend(v),
            Err(e) => t.violations.push(format!("run failed: {e}")),
        }
    }
    for (phase, t) in &tally {
        let first = t.violations.first().cloned().unwrap_or_default();
        s.check(&format!("{phase} delivery invariants"), t.violations.is_empty(), format!("{} runs, {} violations {first}", t.runs, t.violations.len()));
    }
    let total: usize = tally.values().map(|t| t.runs).sum();
    s.check("seeded runs", total >= 200, format!("{total} runs"));

    use AttentionLabel::*;
    use LocationClass::*;
    let table = [
        (Landmark, Attention, CaseCPolicy::NoOp, FeedbackKind::NfbEncourage, Rationale::CaseA),
        (Landmark, NonAttention, CaseCPolicy::NoOp, FeedbackKind::NoOp, Rationale::CaseCNoIntervention),
        (NonRelevant, Attention, CaseCPolicy::NoOp, FeedbackKind::NoOp, Rationale::CaseCNoIntervention),
        (NonRelevant, NonAttention, CaseCPolicy::NoOp, FeedbackKind::NfbReinforce, Rationale::CaseB),
        (Neither, Attention, CaseCPolicy::NoOp, FeedbackKind::NoOp, Rationale::NoIntervention),
        (Neither, NonAttention, CaseCPolicy::NoOp, FeedbackKind::NoOp, Rationale::NoIntervention),
        (Landmark, Attention, CaseCPolicy::DeliverNudge, FeedbackKind::NfbEncourage, Rationale::CaseA),
        (Landmark, NonAttention, CaseCPolicy::DeliverNudge, FeedbackKind::Nudge, Rationale::CaseCIntervention),
        (NonRelevant, Attention, CaseCPolicy::DeliverNudge, FeedbackKind::Nudge, Rationale::CaseCIntervention),
        (NonRelevant, NonAttention, CaseCPolicy::DeliverNudge, FeedbackKind::NfbReinforce, Rationale::CaseB),
        (Neither, Attention, CaseCPolicy::DeliverNudge, FeedbackKind::NoOp, Rationale::NoIntervention),
        (Neither, NonAttention, CaseCPolicy::DeliverNudge, FeedbackKind::NoOp, Rationale::NoIntervention),
    ];
    let mut wrong = Vec::new();
    for (loc, label, policy, kind, why) in table {
        if decide_feedback(loc, label, false, policy) != (kind, why) {
            wrong.push(format!("{loc:?}/{label:?}/{policy:?}"));
        }
        if decide_feedback(loc, label, true, policy) != (FeedbackKind::NoOp, Rationale::NoIntervention) {
            wrong.push(format!("{loc:?}/{label:?}/{policy:?} after a nudge"));
        }
    }
    s.check("decision table 3x2x2", wrong.is_empty(), format!("{} rows, mismatches {wrong:?}", table.len()));
    s.check("default case (c) policy", CaseCPolicy::default() == CaseCPolicy::NoOp, format!("{:?}", CaseCPolicy::default()));
}

// --------------------------------------------------------------- efficacy

struct Closed {
    held_out: f64,
    final_landmarks: usize,
    final_encourage: usize,
    classified_landmarks: usize,
    case_c_landmarks: usize,
}

fn closed_loop(sc: &Scenario, seeds: &str) -> Closed {
    let (_, data) = run_phase1(sc, seeds).unwrap();
    let last: BTreeSet<u32> = [sc.n_sessions].into();
    let (train_part, test_part) = data.split_by_session(&last);
    let held = train(&train_part.balanced(1), &sc.training, 1).unwrap();
    let held_out = evaluate(&held, &test_part.balanced(2)).unwrap().accuracy;
    let model = train(&data.balanced(1), &sc.training, 1).unwrap();
    let out = run_phase2(&sc.clone().with_phase(Phase::ClosedLoopNfb), seeds, Some(model), EngineOptions::default()).unwrap();
    let landmarks: BTreeSet<&str> = sc.path.landmarks().iter().map(|p| p.id.as_str()).collect();
    let at_landmark = |e: &&acta_core::protocol::FeedbackEvent| e.place_id.as_deref().is_some_and(|p| landmarks.contains(p));
    let fin = out.sessions.last().unwrap();
    let final_events: Vec<_> = fin.events.iter().filter(at_landmark).collect();
    let classified: Vec<_> = out
        .sessions
        .iter()
        .flat_map(|s| s.events.iter().filter(at_landmark))
        .filter(|e| matches!(e.rationale, Rationale::CaseA | Rationale::CaseCNoIntervention))
        .collect();
    Closed {
        held_out,
        final_landmarks: final_events.len(),
        final_encourage: final_events.iter().filter(|e| e.kind == FeedbackKind::NfbEncourage).count(),
        classified_landmarks: classified.len(),
        case_c_landmarks: classified.iter().filter(|e| e.rationale == Rationale::CaseCNoIntervention).count(),
    }
}

fn efficacy(s: &mut Suite) {
    let (informative, names) = with_seeds(demo_scenario(Phase::OpenLoopNudges), 2000, EFFICACY_SEEDS);
    let mut flat = informative.clone();
    flat.attention.depths = ModulationDepths::NONE;

    let good: Vec<Closed> = names.iter().map(|n| closed_loop(&informative, n)).collect();
    let worst = good.iter().map(|c| c.held_out).fold(1.0, f64::min);
    let accs: Vec<String> = good.iter().map(|c| format!("{:.3}", c.held_out)).collect();
    s.check(
        "held-out accuracy, informative EEG",
        worst >= MIN_HELD_OUT_ACCURACY,
        format!("min {worst:.3} over {} seeds {accs:?} (need ≥ {MIN_HELD_OUT_ACCURACY})", good.len()),
    );
    let (enc, total) = good.iter().fold((0, 0), |(a, b), c| (a + c.final_encourage, b + c.final_landmarks));
    let rate = enc as f64 / total.max(1) as f64;
    s.check("final-session landmark encouragement", rate >= MIN_FINAL_ENCOURAGE_RATE, format!("{enc}/{total} = {rate:.3} (need ≥ {MIN_FINAL_ENCOURAGE_RATE})"));

    let chance: Vec<Closed> = names.iter().map(|n| closed_loop(&flat, n)).collect();
    let mean = chance.iter().map(|c| c.held_out).sum::<f64>() / chance.len() as f64;
    s.check(
        "held-out accuracy, uninformative EEG",
        (mean - CHANCE).abs() <= CHANCE_TOL,
        format!("mean {mean:.3} over {} seeds (need {CHANCE} ± {CHANCE_TOL})", chance.len()),
    );
    let (c, n) = chance.iter().fold((0, 0), |(a, b), x| (a + x.case_c_landmarks, b + x.classified_landmarks));
    let rate = c as f64 / n.max(1) as f64;
    s.check(
        "case (c) rate at landmarks, uninformative EEG",
        (rate - CHANCE).abs() <= CHANCE_TOL,
        format!("{c}/{n} = {rate:.3} (need {CHANCE} ± {CHANCE_TOL})"),
    );
}

// ----------------------------------------------------------------- oracles

fn random_path(rng: &mut ChaCha8Rng, frame: &LocalFrame) -> PathSpec {
    let mut pts = vec![(0.0, 0.0)];
    let mut heading: f64 = rng.random_range(0.0..2.0 * PI);
    for _ in 0..rng.random_range(1..4) {
        heading += rng.random_range(-1.5..1.5);
        let len = rng.random_range(20.0..80.0);
        let (x, y) = *pts.last().unwrap();
        pts.push((x + len * heading.cos(), y + len * heading.sin()));
    }
    let geo: Vec<GeoPoint> = pts.iter().map(|(x, y)| frame.to_geo(*x, *y)).collect();
    let start = Place::new("start", PlaceKind::Start, geo[0], 5.0).unwrap();
    let dest = Place::new("destination", PlaceKind::Destination, *geo.last().unwrap(), 5.0).unwrap();
    PathSpec::new("random", start, dest, vec![], vec![], geo).unwrap()
}

/// Distance to the polyline by dense resampling at ≤ 1 cm spacing.
fn resampled_distance(p: &GeoPoint, poly: &[GeoPoint]) -> f64 {
    let mut best = f64::INFINITY;
    for w in poly.windows(2) {
        let n = (haversine_distance(&w[0], &w[1]) / 0.01).ceil().max(1.0) as usize;
        for i in 0..=n {
            best = best.min(haversine_distance(p, &w[0].lerp(&w[1], i as f64 / n as f64)));
        }
    }
    best
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<bool>>, BrainGraph) {
    let density = rng.random_range(0.15..0.8);
    let mut adj = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                adj[i][j] = true;
                adj[j][i] = true;
                edges.push((i, j));
            }
        }
    }
    (adj, BrainGraph::unlabeled(n, &edges).unwrap())
}

fn brute_clustering(adj: &[Vec<bool>]) -> f64 {
    let n = adj.len();
    let mut total = 0.0;
    for i in 0..n {
        let k = (0..n).filter(|&j| adj[i][j]).count();
        if k < 2 {
            continue;
        }
        let mut closed = 0;
        for a in 0..n {
            for b in 0..n {
                if a != b && adj[i][a] && adj[i][b] && adj[a][b] {
                    closed += 1;
                }
            }
        }
        total += closed as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

/// Floyd–Warshall; mean distance within the largest component (ties to the
/// component holding the lowest node index).
fn brute_path_length(adj: &[Vec<bool>]) -> (Option<f64>, usize) {
    let n = adj.len();
    let inf = usize::MAX / 4;
    let mut d: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0
                    } else if adj[i][j] {
                        1
                    } else {
                        inf
                    }
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let best = (0..n).map(|i| (0..n).filter(|&j| d[i][j] < inf).collect::<Vec<_>>()).max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0]))).unwrap();
    let k = best.len();
    if k < 2 {
        return (None, k);
    }
    let sum: usize = best.iter().flat_map(|&a| best.iter().filter(move |&&b| b > a).map(move |&b| (a, b))).map(|(a, b)| d[a][b]).sum();
    (Some(sum as f64 / (k * (k - 1) / 2) as f64), k)
}

/// `Q = (1/2m) Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j)`.
fn oracle_modularity(adj: &[Vec<bool>], c: &[usize]) -> f64 {
    let n = adj.len();
    let k: Vec<f64> = (0..n).map(|i| adj[i].iter().filter(|&&e| e).count() as f64).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if c[i] == c[j] {
                q += adj[i][j] as u8 as f64 - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Maximum modularity over every set partition (restricted growth strings).
fn exhaustive_modularity(adj: &[Vec<bool>]) -> f64 {
    fn go(adj: &[Vec<bool>], c: &mut Vec<usize>, max: usize, best: &mut f64) {
        if c.len() == adj.len() {
            *best = best.max(oracle_modularity(adj, c));
            return;
        }
        for v in 0..=max {
            c.push(v);
            go(adj, c, max.max(v + 1), best);
            c.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(adj, &mut Vec::new(), 0, &mut best);
    best
}

fn dft_band_power(x: &[f32], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let w: Vec<f64> = (0..n).map(|i| x[i] as f64 * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())).collect();
    let mut total = 0.0;
    for k in 0..=n / 2 {
        let f = k as f64 * fs / n as f64;
        if !(f >= lo && f < hi) {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in w.iter().enumerate() {
            let a = -2.0 * PI * (k * i % n) as f64 / n as f64;
            re += v * a.cos();
            im += v * a.sin();
        }
        let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
        total += one_sided * (re * re + im * im) / (n * n) as f64;
    }
    total
}

fn weighted_loss(data: &Dataset, m: &AttentionModel, w: &[f64], b: f64) -> f64 {
    let n = data.len() as f64;
    let n_pos = data.count(AttentionLabel::Attention) as f64;
    let mut total = 0.0;
    for r in data.records() {
        let z = b + (0..w.len()).filter(|&j| !m.constant[j]).map(|j| w[j] * (r.fv.values[j] - m.means[j]) / m.stds[j]).sum::<f64>();
        let p = 1.0 / (1.0 + (-z).exp());
        let (y, weight) = if r.label.is_attention() { (1.0, n / (2.0 * n_pos)) } else { (0.0, n / (2.0 * (n - n_pos))) };
        total += weight * -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    total / n + 0.5 * m.meta.l2 * w.iter().map(|v| v * v).sum::<f64>()
}

fn oracles(s: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let frame = LocalFrame::new(GeoPoint::new(45.07, 7.68).unwrap());

    let mut worst = 0.0_f64;
    for _ in 0..ORACLE_CASES {
        let path = random_path(&mut rng, &frame);
        let samples: Vec<TrackPoint> = (0..20)
            .map(|i| {
                let (x, y) = frame.to_local(&path.point_at(rng.random_range(0.0..path.length_m())).0);
                TrackPoint { t: i as f64, pos: frame.to_geo(x + rng.random_range(-15.0..15.0), y + rng.random_range(-15.0..15.0)) }
            })
            .collect();
        let traj = Trajectory::new(samples).unwrap();
        let fast = max_path_deviation(&traj, &path).unwrap();
        let slow = traj.samples().iter().map(|p| resampled_distance(&p.pos, path.polyline())).fold(0.0, f64::max);
        worst = worst.max((fast - slow).abs());
    }
    s.check("max path deviation vs resampling", worst <= DEVIATION_TOL_M, format!("worst |Δ| {worst:.4} m over {ORACLE_CASES} cases (tol {DEVIATION_TOL_M})"));

    let (mut c_bad, mut l_bad, mut q_bad) = (0, 0, 0);
    for _ in 0..ORACLE_CASES {
        let (adj, g) = random_graph(&mut rng, 8);
        if clustering_coefficient(&g).unwrap() != brute_clustering(&adj) {
            c_bad += 1;
        }
        let pl = char_path_length(&g);
        if (pl.value, pl.component_size) != brute_path_length(&adj) {
            l_bad += 1;
        }
        if g.edge_count() > 0 {
            let p = greedy_partition(&g).unwrap();
            let q = oracle_modularity(&adj, &p.assignment);
            if q > exhaustive_modularity(&adj) + 1e-12 || (q - modularity(&g, &p).unwrap()).abs() > 1e-12 {
                q_bad += 1;
            }
        }
    }
    s.check("clustering vs brute force", c_bad == 0, format!("{c_bad}/{ORACLE_CASES} mismatches"));
    s.check("path length vs Floyd-Warshall", l_bad == 0, format!("{l_bad}/{ORACLE_CASES} mismatches"));
    s.check("greedy modularity ≤ exhaustive optimum", q_bad == 0, format!("{q_bad}/{ORACLE_CASES} violations"));

    let tri = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
    let g = BrainGraph::unlabeled(6, &tri).unwrap();
    let mut adj = vec![vec![false; 6]; 6];
    for (a, b) in tri {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let q = modularity(&g, &greedy_partition(&g).unwrap()).unwrap();
    let opt = exhaustive_modularity(&adj);
    s.check("two-triangle modularity", (q - 0.5).abs() < 1e-12 && (opt - 0.5).abs() < 1e-12, format!("greedy {q}, exhaustive {opt}, expected 0.5"));

    let (mut bp_worst, mut pv_worst) = (0.0_f64, 0.0_f64);
    for _ in 0..ORACLE_CASES {
        let fs = [128.0, 250.0, 256.0][rng.random_range(0..3)];
        let n = rng.random_range(100..400);
        let comps: Vec<(f64, f64, f64)> =
            (0..3).map(|_| (rng.random_range(1.0..fs / 2.0), rng.random_range(1.0..20.0), rng.random_range(0.0..2.0 * PI))).collect();
        let x: Vec<f32> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                (comps.iter().map(|(f, a, ph)| a * (2.0 * PI * f * t + ph).sin()).sum::<f64>() + rng.random_range(-5.0..5.0)) as f32
            })
            .collect();
        let win = EegWindow { start_ts: 0.0, fs_hz: fs, samples: vec![x.clone()], label: None };
        for band in Band::standard() {
            let fast = band_power(&win, &band).unwrap()[0];
            let slow = dft_band_power(&x, fs, band.lo_hz, band.hi_hz);
            if slow > 0.0 {
                bp_worst = bp_worst.max((fast - slow).abs() / slow);
            }
        }
        let total: f64 = periodogram(&x, fs).iter().map(|(_, p)| p).sum();
        let energy = (0..n).map(|i| (x[i] as f64 * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())).powi(2)).sum::<f64>() / n as f64;
        pv_worst = pv_worst.max((total - energy).abs() / energy);
    }
    s.check("band power vs direct DFT", bp_worst <= BAND_POWER_REL_TOL, format!("worst relative error {bp_worst:.2e} (tol {BAND_POWER_REL_TOL})"));
    s.check("Parseval identity", pv_worst <= PARSEVAL_REL_TOL, format!("worst relative error {pv_worst:.2e} (tol {PARSEVAL_REL_TOL})"));

    let names: Vec<String> = (0..4).map(|j| format!("f{j}")).collect();
    let mut data = Dataset::new("p", names);
    for i in 0..120 {
        let label = if i % 3 == 0 { AttentionLabel::Attention } else { AttentionLabel::NonAttention };
        let shift = if label.is_attention() { 1.0 } else { -0.5 };
        let values = (0..4).map(|j| shift * j as f64 + rng.random_range(-2.0..2.0) + 10.0 * j as f64).collect();
        data.push(Record { fv: FeatureVector { ts: i as f64, values }, label, origin: Origin::Phase1, session: 1 }).unwrap();
    }
    let base = train(&data, &TrainConfig { epochs: 5, l2: 1e-2, ..Default::default() }, 0).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..ORACLE_CASES {
        let mut m = base.clone();
        m.weights.iter_mut().for_each(|w| *w = rng.random_range(-2.0..2.0));
        m.bias = rng.random_range(-1.0..1.0);
        let (_, gw, gb) = objective(&m, &data).unwrap();
        let h = 1e-5;
        for j in 0..=m.dim() {
            let at = |d: f64| {
                let (mut w, mut b) = (m.weights.clone(), m.bias);
                if j < m.dim() {
                    w[j] += d
                } else {
                    b += d
                }
                weighted_loss(&data, &m, &w, b)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let an = if j < m.dim() { gw[j] } else { gb };
            worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
        }
    }
    s.check("classifier gradient vs central differences", worst <= GRADIENT_REL_TOL, format!("worst relative error {worst:.2e} (tol {GRADIENT_REL_TOL})"));
}

// ------------------------------------------------------------ conservation

fn conservation(s: &mut Suite) {
    for rate in LOSS_RATES {
        let mut sc = small_scenario(Phase::OpenLoopNudges);
        sc.links.sensor_gateway.loss_rate = rate;
        sc.links.gateway_cloud.loss_rate = rate;
        let run = || acta_core::harness::Engine::new(sc.clone(), "default", None, EngineOptions::default()).and_then(|e| e.run());
        let (a, b) = match (run(), run()) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                s.check(&format!("loss {rate}: run"), false, e.to_string());
                continue;
            }
        };
        let mut broken = Vec::new();
        for (i, sess) in a.sessions.iter().enumerate() {
            for (id, c) in &sess.counters {
                if c.emitted != c.stored + c.link_dropped + c.uplink_dropped + c.late_dropped || c.duplicates != 0 {
                    broken.push(format!("session {} {id}: {c:?}", i + 1));
                }
            }
        }
        let (emitted, stored): (u64, u64) = a.sessions.iter().flat_map(|s| s.counters.values()).fold((0, 0), |(e, st), c| (e + c.emitted, st + c.stored));
        s.check(&format!("loss {rate}: accounting"), broken.is_empty(), format!("{stored}/{emitted} stored; {broken:?}"));

        let parsed = acta_core::harness::parse_log(&a.log).unwrap();
        let mut disorder = 0;
        for sess in &parsed.sessions {
            let mut last: BTreeMap<&str, u64> = BTreeMap::new();
            for m in &sess.messages {
                if last.insert(m.sensor_id.as_str(), m.seq).is_some_and(|prev| prev >= m.seq) {
                    disorder += 1;
                }
            }
        }
        s.check(&format!("loss {rate}: strict seq order at cloud"), disorder == 0, format!("{disorder} out-of-order messages"));
        s.check(&format!("loss {rate}: byte-identical logs"), a.log == b.log, format!("{} bytes text, {} bytes EEG", a.log.text.len(), a.log.eeg.len()));
        let before = a.log.clone();
        let r = replay(&a.log);
        s.check(&format!("loss {rate}: replay equality"), r.is_ok() && a.log == before, format!("{:?}", r.map(|r| r.sessions.len())));
    }
}

// ------------------------------------------------------------- eligibility

fn eligibility(s: &mut Suite) {
    let base = ParticipantProfile { id: "p".into(), age_years: 70, mci_diagnosed: true, informatics_entry_level: true, exclusions: BTreeSet::new() };
    let with = |f: &dyn Fn(&mut ParticipantProfile)| {
        let mut p = base.clone();
        f(&mut p);
        p
    };
    let excluded = |e: Exclusion| {
        with(&move |p: &mut ParticipantProfile| {
            p.exclusions.insert(e);
        })
    };
    let cases: Vec<(&str, ParticipantProfile, Vec<Ineligibility>)> = vec![
        ("age 70, eligible", base.clone(), vec![]),
        ("age 64", with(&|p| p.age_years = 64), vec![Ineligibility::Age { years: 64 }]),
        ("age 65", with(&|p| p.age_years = 65), vec![]),
        ("age 85", with(&|p| p.age_years = 85), vec![]),
        ("age 86", with(&|p| p.age_years = 86), vec![Ineligibility::Age { years: 86 }]),
        ("no MCI diagnosis", with(&|p| p.mci_diagnosed = false), vec![Ineligibility::NoMciDiagnosis]),
        ("not entry level", with(&|p| p.informatics_entry_level = false), vec![Ineligibility::NotEntryLevel]),
        ("severe psychiatric", excluded(Exclusion::SeverePsychiatric), vec![Ineligibility::Excluded { exclusion: Exclusion::SeverePsychiatric }]),
        (
            "continuous medical assistance",
            excluded(Exclusion::ContinuousMedicalAssistance),
            vec![Ineligibility::Excluded { exclusion: Exclusion::ContinuousMedicalAssistance }],
        ),
        ("not independent daily", excluded(Exclusion::NotIndependentDaily), vec![Ineligibility::Excluded { exclusion: Exclusion::NotIndependentDaily }]),
        ("motor impairment", excluded(Exclusion::MotorImpairment), vec![Ineligibility::Excluded { exclusion: Exclusion::MotorImpairment }]),
        (
            "age 90, no MCI, not entry level, motor impairment",
            with(&|p| {
                p.age_years = 90;
                p.mci_diagnosed = false;
                p.informatics_entry_level = false;
                p.exclusions.insert(Exclusion::MotorImpairment);
            }),
            vec![
                Ineligibility::Age { years: 90 },
                Ineligibility::NoMciDiagnosis,
                Ineligibility::NotEntryLevel,
                Ineligibility::Excluded { exclusion: Exclusion::MotorImpairment },
            ],
        ),
    ];
    let mut wrong = Vec::new();
    for (name, p, expected) in &cases {
        let got = validate_profile(p);
        let reasons = match &got {
            acta_core::harness::Eligibility::Eligible => vec![],
            acta_core::harness::Eligibility::Ineligible { reasons } => reasons.clone(),
        };
        let mut a = reasons.clone();
        let mut b = expected.clone();
        a.sort_by_key(|r| r.to_string());
        b.sort_by_key(|r| r.to_string());
        if a != b || got.is_eligible() != expected.is_empty() {
            wrong.push(format!("{name}: {reasons:?}"));
        }
    }
    s.check("eligibility table", wrong.is_empty() && cases.len() == 12, format!("{} cases, mismatches {wrong:?}", cases.len()));
}

fn main() {
    let mut s = Suite { failures: 0, checks: 0 };
    s.section("battery", Duration::from_secs(1), battery);
    s.section("protocol delivery", Duration::from_secs(60), protocol);
    s.section("closed-loop efficacy", Duration::from_secs(300), efficacy);
    s.section("oracle equivalence", Duration::from_secs(120), oracles);
    s.section("pipeline conservation and determinism", Duration::from_secs(120), conservation);
    s.section("eligibility", Duration::from_secs(1), eligibility);
    println!("acceptance: {} checks, {} failed", s.checks, s.failures);
    if s.failures > 0 {
        std::process::exit(1);
    }
}
