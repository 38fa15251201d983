//! Geospatial primitives, the route model and behavioral metrics.
//!
//! Distances are great-circle (haversine, spherical Earth of radius
//! [`EARTH_RADIUS_M`]). Point-to-route distances use a local planar
//! projection per segment, which is accurate to well under a centimetre on
//! routes of a few kilometres.

mod distance;
mod metrics;
mod path;

pub use distance::{haversine_distance, is_within, point_segment_distance, LocalFrame};
pub use metrics::{
    completion_rate, max_path_deviation, peak_speed, reaction_time, smoothed_speeds, step_count, BehavioralReport, ReactionTime, SPEED_CHANGE_MPS,
    STEP_REFRACTORY_S, STEP_THRESHOLD_MPS2,
};
pub use path::{PathSpec, Place, PlaceKind, TrackPoint, Trajectory, DEFAULT_PLACE_RADIUS_M, MAX_PATH_LENGTH_M};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate (lat {lat}, lon {lon})")]
    InvalidPoint { lat: f64, lon: f64 },
    #[error("place {id}: radius must be positive and finite, got {radius}")]
    InvalidRadius { id: String, radius: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory needs at least {needed} samples, has {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("trajectory timestamps must be finite and strictly increasing (sample {index})")]
    NonMonotonicTimestamps { index: usize },
    #[error("stimulus at {ts} s lies outside the trajectory span [{start}, {end}]")]
    StimulusOutOfRange { ts: f64, start: f64, end: f64 },
    #[error("invalid path {id}: {reason}")]
    InvalidPath { id: String, reason: String },
}

/// A WGS84-style coordinate in degrees. Construction rejects NaN and
/// out-of-range values, so every `GeoPoint` in the system is valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;
    fn try_from(r: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(r.lat, r.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)) {
            return Err(GeoError::InvalidPoint { lat, lon });
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Linear interpolation in coordinate space; `frac` is clamped to [0, 1].
    pub fn lerp(&self, other: &GeoPoint, frac: f64) -> GeoPoint {
        let f = frac.clamp(0.0, 1.0);
        GeoPoint { lat: self.lat + (other.lat - self.lat) * f, lon: self.lon + (other.lon - self.lon) * f }
    }
}
