//! Behavioral and kinematic metrics computed from GPS tracks and
//! accelerometer magnitude.

use serde::{Deserialize, Serialize};

use super::distance::{haversine_distance, is_within, point_segment_distance};
use super::{GeoError, PathSpec, Trajectory};

/// Accelerometer magnitude a step peak must exceed, m/s².
pub const STEP_THRESHOLD_MPS2: f64 = 11.0;
/// Minimum spacing between counted step peaks, seconds.
pub const STEP_REFRACTORY_S: f64 = 0.3;
/// Smoothed-speed change that counts as a behavioral reaction, m/s.
pub const SPEED_CHANGE_MPS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionTime {
    pub stimulus_id: String,
    /// `None` when neither an acknowledgment nor a speed change was seen.
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehavioralReport {
    /// Maximal deviation from the ideal route, metres.
    pub path_efficiency_m: f64,
    pub peak_speed_mps: f64,
    pub reaction_times_s: Vec<ReactionTime>,
    pub step_count: u64,
    pub completion_rate: f64,
}

/// Max over samples of the distance to the nearest point of the polyline.
pub fn max_path_deviation(traj: &Trajectory, path: &PathSpec) -> Result<f64, GeoError> {
    if traj.is_empty() {
        return Err(GeoError::EmptyTrajectory);
    }
    let poly = path.polyline();
    let worst = traj
        .samples()
        .iter()
        .map(|s| poly.windows(2).map(|w| point_segment_distance(&s.pos, &w[0], &w[1]).0).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(worst)
}

/// Speed series smoothed with a trailing 3-sample moving average.
///
/// Entry `i` is paired with sample `i + 1`: the raw speed of segment
/// `(i, i + 1)` averaged with up to two preceding segments.
pub fn smoothed_speeds(traj: &Trajectory) -> Vec<(f64, f64)> {
    let s = traj.samples();
    let raw: Vec<f64> = s.windows(2).map(|w| haversine_distance(&w[0].pos, &w[1].pos) / (w[1].t - w[0].t)).collect();
    (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(2);
            let mean = raw[lo..=i].iter().sum::<f64>() / (i - lo + 1) as f64;
            (s[i + 1].t, mean)
        })
        .collect()
}

pub fn peak_speed(traj: &Trajectory) -> Result<f64, GeoError> {
    if traj.len() < 2 {
        return Err(GeoError::InsufficientSamples { needed: 2, got: traj.len() });
    }
    Ok(smoothed_speeds(traj).into_iter().map(|(_, v)| v).fold(0.0, f64::max))
}

/// Reaction latency to a stimulus: the earlier of the explicit
/// acknowledgment and the first post-stimulus sample whose smoothed speed
/// differs from the speed at stimulus time by more than
/// [`SPEED_CHANGE_MPS`]. `Ok(None)` when neither happens.
pub fn reaction_time(stimulus_ts: f64, traj: &Trajectory, ack_ts: Option<f64>) -> Result<Option<f64>, GeoError> {
    let (start, end) = traj.span().ok_or(GeoError::EmptyTrajectory)?;
    if !(start..=end).contains(&stimulus_ts) {
        return Err(GeoError::StimulusOutOfRange { ts: stimulus_ts, start, end });
    }
    let from_ack = ack_ts.filter(|a| *a >= stimulus_ts).map(|a| a - stimulus_ts);

    let speeds = smoothed_speeds(traj);
    let from_speed = if speeds.is_empty() {
        None
    } else {
        let k = speeds.partition_point(|(t, _)| *t <= stimulus_ts);
        let reference = speeds[k.saturating_sub(1)].1;
        speeds[k..].iter().find(|(_, v)| (v - reference).abs() > SPEED_CHANGE_MPS).map(|(t, _)| t - stimulus_ts)
    };

    Ok(match (from_ack, from_speed) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    })
}

/// Fraction of landmarks reached. In ordered mode landmark `k` only counts
/// once landmark `k - 1` has been counted.
pub fn completion_rate(traj: &Trajectory, path: &PathSpec, ordered: bool) -> f64 {
    let lms = path.landmarks();
    if lms.is_empty() {
        return 1.0;
    }
    let reached = if ordered {
        let mut next = 0;
        for s in traj.samples() {
            if next < lms.len() && is_within(&s.pos, &lms[next]) {
                next += 1;
            }
        }
        next
    } else {
        lms.iter().filter(|lm| traj.samples().iter().any(|s| is_within(&s.pos, lm))).count()
    };
    reached as f64 / lms.len() as f64
}

/// Counts local maxima above [`STEP_THRESHOLD_MPS2`], keeping only peaks at
/// least [`STEP_REFRACTORY_S`] after the previously counted one.
pub fn step_count(accel_magnitude: &[(f64, f64)]) -> u64 {
    let mut count = 0;
    let mut last_peak: Option<f64> = None;
    for i in 1..accel_magnitude.len().saturating_sub(1) {
        let (t, v) = accel_magnitude[i];
        let is_peak = v > STEP_THRESHOLD_MPS2 && v > accel_magnitude[i - 1].1 && v >= accel_magnitude[i + 1].1;
        if is_peak && last_peak.is_none_or(|lp| t - lp >= STEP_REFRACTORY_S) {
            count += 1;
            last_peak = Some(t);
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{GeoPoint, LocalFrame, Place, PlaceKind, TrackPoint, EARTH_RADIUS_M};

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn place(id: &str, kind: PlaceKind, p: GeoPoint) -> Place {
        Place::new(id, kind, p, 20.0).unwrap()
    }

    /// Straight northbound route with four landmarks every 200 m.
    fn meridian_path() -> PathSpec {
        let origin = pt(45.0, 9.0);
        let f = LocalFrame::new(origin);
        let end = f.to_geo(0.0, 1000.0);
        let lms = (1..=4).map(|k| place(&format!("lm{k}"), PlaceKind::Landmark { index: k }, f.to_geo(0.0, 200.0 * k as f64))).collect();
        PathSpec::new("meridian", place("s", PlaceKind::Start, origin), place("d", PlaceKind::Destination, end), lms, vec![], vec![origin, end]).unwrap()
    }

    fn walk(points: &[(f64, f64, f64)]) -> Trajectory {
        let f = LocalFrame::new(pt(45.0, 9.0));
        Trajectory::new(points.iter().map(|&(t, x, y)| TrackPoint { t, pos: f.to_geo(x, y) }).collect()).unwrap()
    }

    #[test]
    fn deviation_zero_on_vertices() {
        let p = meridian_path();
        let traj = Trajectory::new(p.polyline().iter().enumerate().map(|(i, &pos)| TrackPoint { t: i as f64, pos }).collect()).unwrap();
        assert!(max_path_deviation(&traj, &p).unwrap() < 1e-9);
    }

    #[test]
    fn deviation_of_perpendicular_offset() {
        let p = meridian_path();
        let traj = walk(&[(0.0, 0.0, 100.0), (1.0, 3.0, 400.0), (2.0, 0.0, 600.0)]);
        let d = max_path_deviation(&traj, &p).unwrap();
        assert!((d - 3.0).abs() < 0.01, "{d}");
    }

    #[test]
    fn deviation_needs_samples() {
        assert_eq!(max_path_deviation(&Trajectory::default(), &meridian_path()), Err(GeoError::EmptyTrajectory));
    }

    #[test]
    fn stationary_has_zero_peak_speed() {
        let traj = walk(&[(0.0, 5.0, 5.0), (1.0, 5.0, 5.0), (2.0, 5.0, 5.0)]);
        assert_eq!(peak_speed(&traj).unwrap(), 0.0);
    }

    #[test]
    fn uniform_walker_peak_speed() {
        let pts: Vec<_> = (0..30).map(|i| (i as f64, 0.0, 1.5 * i as f64)).collect();
        let v = peak_speed(&walk(&pts)).unwrap();
        assert!((v - 1.5).abs() < 0.01, "{v}");
    }

    #[test]
    fn peak_speed_needs_two_samples() {
        assert!(matches!(peak_speed(&walk(&[(0.0, 0.0, 0.0)])), Err(GeoError::InsufficientSamples { .. })));
    }

    #[test]
    fn reaction_from_ack_only() {
        let pts: Vec<_> = (0..20).map(|i| (i as f64, 0.0, i as f64)).collect();
        let rt = reaction_time(5.0, &walk(&pts), Some(7.0)).unwrap();
        assert!((rt.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reaction_takes_earlier_of_speed_change_and_ack() {
        // 1 m/s until t = 10, then 2 m/s; the stimulus arrives at t = 9
        let mut pts = Vec::new();
        let mut y = 0.0;
        for i in 0..20 {
            pts.push((i as f64, 0.0, y));
            y += if i < 9 { 1.0 } else { 2.0 };
        }
        let rt = reaction_time(9.0, &walk(&pts), Some(12.0)).unwrap();
        assert!((rt.unwrap() - 1.0).abs() < 1e-9, "{rt:?}");
    }

    #[test]
    fn reaction_missing_without_ack_or_change() {
        let pts: Vec<_> = (0..20).map(|i| (i as f64, 0.0, i as f64)).collect();
        assert_eq!(reaction_time(5.0, &walk(&pts), None).unwrap(), None);
    }

    #[test]
    fn reaction_stimulus_out_of_range() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 0.0, i as f64)).collect();
        assert!(matches!(reaction_time(10.0, &walk(&pts), None), Err(GeoError::StimulusOutOfRange { .. })));
    }

    #[test]
    fn completion_all_landmarks_in_order() {
        let pts: Vec<_> = (0..=100).map(|i| (i as f64, 0.0, 10.0 * i as f64)).collect();
        let t = walk(&pts);
        let p = meridian_path();
        assert_eq!(completion_rate(&t, &p, true), 1.0);
        assert_eq!(completion_rate(&t, &p, false), 1.0);
    }

    #[test]
    fn completion_ordered_blocks_skipped_landmark() {
        // visits landmark 1 (y=200) and 3 (y=600) by detouring 100 m east around 2 and 4
        let t = walk(&[(0.0, 0.0, 0.0), (1.0, 0.0, 200.0), (2.0, 100.0, 400.0), (3.0, 0.0, 600.0), (4.0, 100.0, 800.0)]);
        let p = meridian_path();
        assert_eq!(completion_rate(&t, &p, true), 0.25);
        assert_eq!(completion_rate(&t, &p, false), 0.5);
    }

    #[test]
    fn flat_accel_has_no_steps() {
        let s: Vec<_> = (0..500).map(|i| (i as f64 * 0.02, 9.81)).collect();
        assert_eq!(step_count(&s), 0);
    }

    #[test]
    fn two_hz_gait_over_ten_seconds() {
        let fs = 50.0;
        let s: Vec<_> = (0..500)
            .map(|i| {
                let t = i as f64 / fs;
                (t, 9.81 + 3.0 * (2.0 * std::f64::consts::PI * 2.0 * t).sin())
            })
            .collect();
        // independent scan: count upward crossings of the threshold
        let crossings = s.windows(2).filter(|w| w[0].1 <= STEP_THRESHOLD_MPS2 && w[1].1 > STEP_THRESHOLD_MPS2).count() as u64;
        assert_eq!(crossings, 20);
        assert_eq!(step_count(&s), crossings);
    }

    #[test]
    fn refractory_merges_close_peaks() {
        let mut s: Vec<(f64, f64)> = (0..100).map(|i| (i as f64 * 0.02, 9.81)).collect();
        s[20].1 = 12.0; // t = 0.40
        s[30].1 = 12.5; // t = 0.60
        assert_eq!(step_count(&s), 1);
    }

    #[test]
    fn one_metre_per_millidegree_sanity() {
        // keeps the test helpers honest about the projection scale
        let f = LocalFrame::new(pt(45.0, 9.0));
        let p = f.to_geo(0.0, 1.0);
        assert!(((p.lat() - 45.0).to_radians() * EARTH_RADIUS_M - 1.0).abs() < 1e-9);
    }
}
