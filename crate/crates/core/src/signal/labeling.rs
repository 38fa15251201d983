//! GPS-driven labels for EEG windows: windows centred inside a landmark
//! geofence are attention examples, all others non-attention. Windows that
//! straddle a geofence boundary are dropped.

use super::{EegWindow, SignalError};
use crate::geo::{is_within, PathSpec, Trajectory};
use crate::AttentionLabel;

/// A window is dropped when more than this fraction of it disagrees with
/// the state at its midpoint.
pub const STRADDLE_LIMIT: f64 = 0.25;

/// Sub-window probe count for the straddle rule.
const PROBES: usize = 40;

fn inside_landmark(traj: &Trajectory, path: &PathSpec, t: f64) -> Option<bool> {
    let pos = traj.position_at(t)?;
    Some(path.landmarks().iter().any(|lm| is_within(&pos, lm)))
}

/// Label for the window `[start, start + duration]`, or `None` when it
/// straddles a landmark boundary.
pub fn window_label(start: f64, duration: f64, traj: &Trajectory, path: &PathSpec) -> Result<Option<AttentionLabel>, SignalError> {
    let out = || SignalError::TimestampOutOfRange { start, end: start + duration };
    let (t0, t1) = traj.span().ok_or_else(out)?;
    if start < t0 || start + duration > t1 {
        return Err(out());
    }
    let mid = inside_landmark(traj, path, start + duration / 2.0).ok_or_else(out)?;
    let mut disagree = 0;
    for j in 0..PROBES {
        let t = start + (j as f64 + 0.5) / PROBES as f64 * duration;
        if inside_landmark(traj, path, t).ok_or_else(out)? != mid {
            disagree += 1;
        }
    }
    if disagree as f64 / PROBES as f64 > STRADDLE_LIMIT {
        return Ok(None);
    }
    Ok(Some(if mid { AttentionLabel::Attention } else { AttentionLabel::NonAttention }))
}

/// Labels every window; straddling windows are removed from the output.
pub fn label_windows(windows: Vec<EegWindow>, traj: &Trajectory, path: &PathSpec) -> Result<Vec<EegWindow>, SignalError> {
    let mut out = Vec::with_capacity(windows.len());
    for mut w in windows {
        if let Some(label) = window_label(w.start_ts, w.duration_s(), traj, path)? {
            w.label = Some(label);
            out.push(w);
        }
    }
    Ok(out)
}
