use serde::{Deserialize, Serialize};

use super::distance::{haversine_distance, LocalFrame};
use super::{GeoError, GeoPoint};

/// Routes longer than this are rejected.
pub const MAX_PATH_LENGTH_M: f64 = 3000.0;

/// Geofence radius used when a place does not set one (urban GPS accuracy).
pub const DEFAULT_PLACE_RADIUS_M: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlaceKind {
    /// Route landmark, 1-based visiting order.
    Landmark {
        index: u32,
    },
    NonRelevant,
    Start,
    Destination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    pub kind: PlaceKind,
    pub center: GeoPoint,
    pub radius_m: f64,
}

impl Place {
    pub fn new(id: impl Into<String>, kind: PlaceKind, center: GeoPoint, radius_m: f64) -> Result<Self, GeoError> {
        let id = id.into();
        if !(radius_m.is_finite() && radius_m > 0.0) {
            return Err(GeoError::InvalidRadius { id, radius: radius_m });
        }
        Ok(Place { id, kind, center, radius_m })
    }

    pub fn landmark_index(&self) -> Option<u32> {
        match self.kind {
            PlaceKind::Landmark { index } => Some(index),
            _ => None,
        }
    }
}

/// A training route: start, destination, ordered landmarks, non-relevant
/// places passed on the way, and the ideal polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathSpecRaw", into = "PathSpecRaw")]
pub struct PathSpec {
    id: String,
    start: Place,
    destination: Place,
    landmarks: Vec<Place>,
    non_relevant: Vec<Place>,
    polyline: Vec<GeoPoint>,
    cumulative_m: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PathSpecRaw {
    id: String,
    start: Place,
    destination: Place,
    landmarks: Vec<Place>,
    non_relevant: Vec<Place>,
    polyline: Vec<GeoPoint>,
}

impl TryFrom<PathSpecRaw> for PathSpec {
    type Error = GeoError;
    fn try_from(r: PathSpecRaw) -> Result<Self, GeoError> {
        PathSpec::new(r.id, r.start, r.destination, r.landmarks, r.non_relevant, r.polyline)
    }
}

impl From<PathSpec> for PathSpecRaw {
    fn from(p: PathSpec) -> Self {
        PathSpecRaw { id: p.id, start: p.start, destination: p.destination, landmarks: p.landmarks, non_relevant: p.non_relevant, polyline: p.polyline }
    }
}

impl PathSpec {
    pub fn new(
        id: impl Into<String>,
        start: Place,
        destination: Place,
        landmarks: Vec<Place>,
        non_relevant: Vec<Place>,
        polyline: Vec<GeoPoint>,
    ) -> Result<Self, GeoError> {
        let id = id.into();
        let bad = |reason: String| GeoError::InvalidPath { id: id.clone(), reason };

        if polyline.len() < 2 {
            return Err(bad("polyline needs at least 2 points".into()));
        }
        let mut cumulative_m = Vec::with_capacity(polyline.len());
        cumulative_m.push(0.0);
        for w in polyline.windows(2) {
            let last = *cumulative_m.last().unwrap();
            cumulative_m.push(last + haversine_distance(&w[0], &w[1]));
        }
        let length = *cumulative_m.last().unwrap();
        if length > MAX_PATH_LENGTH_M {
            return Err(bad(format!("polyline length {length:.1} m exceeds {MAX_PATH_LENGTH_M} m")));
        }
        if !matches!(start.kind, PlaceKind::Start) {
            return Err(bad(format!("start place {} has kind {:?}", start.id, start.kind)));
        }
        if !matches!(destination.kind, PlaceKind::Destination) {
            return Err(bad(format!("destination place {} has kind {:?}", destination.id, destination.kind)));
        }
        for (i, lm) in landmarks.iter().enumerate() {
            if lm.landmark_index() != Some(i as u32 + 1) {
                return Err(bad(format!("landmark {} should carry index {}", lm.id, i + 1)));
            }
        }
        if let Some(p) = non_relevant.iter().find(|p| !matches!(p.kind, PlaceKind::NonRelevant)) {
            return Err(bad(format!("place {} listed as non-relevant has kind {:?}", p.id, p.kind)));
        }

        let mut ids = std::collections::HashSet::new();
        for p in std::iter::once(&start).chain([&destination]).chain(&landmarks).chain(&non_relevant) {
            if !ids.insert(p.id.as_str()) {
                return Err(bad(format!("duplicate place id {}", p.id)));
            }
        }

        let fenced: Vec<&Place> = landmarks.iter().chain(&non_relevant).collect();
        for (i, a) in fenced.iter().enumerate() {
            for b in &fenced[i + 1..] {
                if haversine_distance(&a.center, &b.center) <= a.radius_m + b.radius_m {
                    return Err(bad(format!("places {} and {} overlap", a.id, b.id)));
                }
            }
        }

        let spec = PathSpec { id: id.clone(), start, destination, landmarks, non_relevant, polyline, cumulative_m };

        // The ideal route must reach every landmark, in index order.
        let mut prev_s = -1.0_f64;
        for lm in &spec.landmarks {
            match spec.first_entry_arc_length(lm, prev_s.max(0.0)) {
                Some(s) if s >= prev_s => prev_s = s,
                _ => return Err(bad(format!("polyline does not pass landmark {} in order", lm.id))),
            }
        }
        Ok(spec)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn start(&self) -> &Place {
        &self.start
    }

    pub fn destination(&self) -> &Place {
        &self.destination
    }

    pub fn landmarks(&self) -> &[Place] {
        &self.landmarks
    }

    pub fn non_relevant(&self) -> &[Place] {
        &self.non_relevant
    }

    pub fn polyline(&self) -> &[GeoPoint] {
        &self.polyline
    }

    pub fn length_m(&self) -> f64 {
        *self.cumulative_m.last().unwrap()
    }

    /// Every place on the route: start, landmarks, non-relevant, destination.
    pub fn places(&self) -> impl Iterator<Item = &Place> {
        std::iter::once(&self.start).chain(&self.landmarks).chain(&self.non_relevant).chain(std::iter::once(&self.destination))
    }

    pub fn place(&self, id: &str) -> Option<&Place> {
        self.places().find(|p| p.id == id)
    }

    /// Point at arc length `s` along the polyline (clamped to its ends), with
    /// the unit (east, north) heading of the containing segment.
    pub fn point_at(&self, s: f64) -> (GeoPoint, (f64, f64)) {
        let s = s.clamp(0.0, self.length_m());
        let seg = match self.cumulative_m.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.polyline.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.polyline.len() - 2),
        };
        let (a, b) = (&self.polyline[seg], &self.polyline[seg + 1]);
        let seg_len = self.cumulative_m[seg + 1] - self.cumulative_m[seg];
        let frac = if seg_len > 0.0 { (s - self.cumulative_m[seg]) / seg_len } else { 0.0 };
        let frame = LocalFrame::new(*a);
        let (bx, by) = frame.to_local(b);
        let norm = (bx * bx + by * by).sqrt();
        let heading = if norm > 0.0 { (bx / norm, by / norm) } else { (0.0, 1.0) };
        (frame.to_geo(bx * frac, by * frac), heading)
    }

    fn first_entry_arc_length(&self, place: &Place, from_s: f64) -> Option<f64> {
        let step = 0.5;
        let mut s = from_s;
        let len = self.length_m();
        while s <= len + step {
            let (p, _) = self.point_at(s);
            if haversine_distance(&p, &place.center) <= place.radius_m {
                return Some(s);
            }
            s += step;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub pos: GeoPoint,
}

/// Timestamped positions, strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<TrackPoint>", into = "Vec<TrackPoint>")]
pub struct Trajectory {
    samples: Vec<TrackPoint>,
}

impl TryFrom<Vec<TrackPoint>> for Trajectory {
    type Error = GeoError;
    fn try_from(v: Vec<TrackPoint>) -> Result<Self, GeoError> {
        Trajectory::new(v)
    }
}

impl From<Trajectory> for Vec<TrackPoint> {
    fn from(t: Trajectory) -> Self {
        t.samples
    }
}

impl Trajectory {
    pub fn new(samples: Vec<TrackPoint>) -> Result<Self, GeoError> {
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || (i > 0 && s.t <= samples[i - 1].t) {
                return Err(GeoError::NonMonotonicTimestamps { index: i });
            }
        }
        Ok(Trajectory { samples })
    }

    pub fn samples(&self) -> &[TrackPoint] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    /// Linearly interpolated position; `None` outside the sampled span.
    pub fn position_at(&self, t: f64) -> Option<GeoPoint> {
        let (t0, t1) = self.span()?;
        if t < t0 || t > t1 {
            return None;
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        if i == 0 {
            return Some(self.samples[0].pos);
        }
        let a = &self.samples[i - 1];
        match self.samples.get(i) {
            Some(b) => Some(a.pos.lerp(&b.pos, (t - a.t) / (b.t - a.t))),
            None => Some(a.pos),
        }
    }

    /// Same positions, every timestamp shifted by `dt`.
    pub fn translated(&self, dt: f64) -> Trajectory {
        Trajectory { samples: self.samples.iter().map(|s| TrackPoint { t: s.t + dt, pos: s.pos }).collect() }
    }

    /// Prefix containing the first `n` samples.
    pub fn prefix(&self, n: usize) -> Trajectory {
        Trajectory { samples: self.samples[..n.min(self.samples.len())].to_vec() }
    }
}
