use super::{GeoPoint, Place, EARTH_RADIUS_M};

/// Great-circle distance in metres.
pub fn haversine_distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat().to_radians(), b.lat().to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon() - a.lon()).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Geofence test. The boundary is inclusive.
pub fn is_within(pos: &GeoPoint, place: &Place) -> bool {
    haversine_distance(pos, &place.center) <= place.radius_m
}

/// Equirectangular tangent-plane frame anchored at an origin point.
/// `x` points east, `y` north, both in metres.
#[derive(Debug, Clone, Copy)]
pub struct LocalFrame {
    origin: GeoPoint,
    cos_lat: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        LocalFrame { origin, cos_lat: origin.lat().to_radians().cos() }
    }

    pub fn to_local(&self, p: &GeoPoint) -> (f64, f64) {
        let x = (p.lon() - self.origin.lon()).to_radians() * EARTH_RADIUS_M * self.cos_lat;
        let y = (p.lat() - self.origin.lat()).to_radians() * EARTH_RADIUS_M;
        (x, y)
    }

    /// Inverse of [`LocalFrame::to_local`]. Results are clamped into the
    /// valid coordinate range.
    pub fn to_geo(&self, x: f64, y: f64) -> GeoPoint {
        let lat = self.origin.lat() + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin.lon() + (x / (EARTH_RADIUS_M * self.cos_lat)).to_degrees();
        GeoPoint::new(lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0)).expect("clamped coordinate is valid")
    }
}

/// Distance from `p` to the segment `a`–`b`, projected on the tangent plane
/// at `a`. Returns `(distance_m, t)` where `t ∈ [0, 1]` is the position of
/// the nearest point along the segment.
pub fn point_segment_distance(p: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> (f64, f64) {
    let frame = LocalFrame::new(*a);
    let (bx, by) = frame.to_local(b);
    let (px, py) = frame.to_local(p);
    let len2 = bx * bx + by * by;
    let t = if len2 > 0.0 { ((px * bx + py * by) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (dx, dy) = (px - t * bx, py - t * by);
    ((dx * dx + dy * dy).sqrt(), t)
}
