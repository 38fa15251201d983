use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geo::{LocalFrame, PathSpec, TrackPoint, Trajectory};

/// Step-to-step correlation of the lateral offset.
const LATERAL_CORRELATION: f64 = 0.95;
/// Speed never drops below this fraction of the nominal speed.
const MIN_SPEED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerParams {
    pub speed_mps: f64,
    /// Standard deviation of the per-step speed, m/s.
    pub speed_noise_mps: f64,
    /// Stationary standard deviation of the lateral offset, metres.
    pub lateral_noise_m: f64,
}

impl Default for WalkerParams {
    fn default() -> Self {
        WalkerParams { speed_mps: 1.2, speed_noise_mps: 0.1, lateral_noise_m: 1.5 }
    }
}

impl WalkerParams {
    pub fn validate(&self) -> Result<(), String> {
        let ok = self.speed_mps.is_finite()
            && self.speed_mps > 0.0
            && self.speed_noise_mps.is_finite()
            && self.speed_noise_mps >= 0.0
            && self.lateral_noise_m.is_finite()
            && self.lateral_noise_m >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(format!("invalid walker parameters {self:?}"))
        }
    }
}

/// One-way walk from start to destination along the route polyline,
/// sampled every `1 / sample_hz` seconds. The lateral offset is an AR(1)
/// process starting on the route; the last sample is the polyline end,
/// reached at its interpolated arrival time.
pub fn simulate_walker(path: &PathSpec, params: &WalkerParams, sample_hz: f64, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / sample_hz;
    let len = path.length_m();
    let rho = LATERAL_CORRELATION;
    let innovation = params.lateral_noise_m * (1.0 - rho * rho).sqrt();

    let place = |s: f64, offset: f64| {
        let (p, (hx, hy)) = path.point_at(s);
        LocalFrame::new(p).to_geo(-hy * offset, hx * offset)
    };

    let mut samples = vec![TrackPoint { t: 0.0, pos: place(0.0, 0.0) }];
    let (mut s, mut t, mut lateral) = (0.0, 0.0, 0.0);
    loop {
        let noise: f64 = rng.sample(StandardNormal);
        let v = (params.speed_mps + params.speed_noise_mps * noise).max(MIN_SPEED_FRACTION * params.speed_mps);
        let lat_noise: f64 = rng.sample(StandardNormal);
        lateral = rho * lateral + innovation * lat_noise;
        if s + v * dt >= len {
            t += (len - s) / v;
            samples.push(TrackPoint { t, pos: place(len, 0.0) });
            break;
        }
        s += v * dt;
        t += dt;
        samples.push(TrackPoint { t, pos: place(s, lateral) });
    }
    Trajectory::new(samples).expect("walker timestamps increase")
}
