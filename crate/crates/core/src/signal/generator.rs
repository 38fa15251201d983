//! Synthetic EEG: pink-ish background noise plus theta, alpha and beta
//! rhythms. While the attention indicator is on, frontal theta amplitude is
//! scaled by `1 + depths.theta` and occipital alpha by `1 − depths.alpha`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{region_of, EegConfig, EegStream, Region};

const THETA_HZ: f64 = 6.0;
const ALPHA_HZ: f64 = 10.0;
const BETA_HZ: f64 = 20.0;
/// AR(1) poles of the three noise components; their sum approximates a
/// 1/f spectrum over the EEG range.
const NOISE_POLES: [f64; 3] = [0.99, 0.9, 0.5];
/// Per-channel phase scatter around the region's shared phase, radians.
const PHASE_JITTER: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationDepths {
    pub theta: f64,
    pub alpha: f64,
}

impl Default for ModulationDepths {
    fn default() -> Self {
        ModulationDepths { theta: 0.5, alpha: 0.5 }
    }
}

impl ModulationDepths {
    pub const NONE: ModulationDepths = ModulationDepths { theta: 0.0, alpha: 0.0 };
}

/// Baseline rhythm amplitudes and noise level, μV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhythmAmplitudes {
    pub theta_uv: f64,
    pub alpha_uv: f64,
    pub beta_uv: f64,
    pub noise_uv: f64,
}

impl Default for RhythmAmplitudes {
    fn default() -> Self {
        RhythmAmplitudes { theta_uv: 6.0, alpha_uv: 10.0, beta_uv: 3.0, noise_uv: 10.0 }
    }
}

/// Piecewise-constant attention indicator plus the generator's amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionProfile {
    /// `(start_ts, attending)` change points, sorted by time. Before the
    /// first change point the indicator is off.
    pub segments: Vec<(f64, bool)>,
    pub depths: ModulationDepths,
    pub rhythms: RhythmAmplitudes,
}

impl AttentionProfile {
    pub fn constant(attending: bool, depths: ModulationDepths) -> Self {
        AttentionProfile { segments: vec![(f64::NEG_INFINITY, attending)], depths, rhythms: RhythmAmplitudes::default() }
    }

    pub fn is_attending(&self, t: f64) -> bool {
        let i = self.segments.partition_point(|(s, _)| *s <= t);
        i > 0 && self.segments[i - 1].1
    }

    /// Total time attending within `[t0, t1)`.
    pub fn attending_time(&self, t0: f64, t1: f64) -> f64 {
        let mut total = 0.0;
        for (i, (s, on)) in self.segments.iter().enumerate() {
            let e = self.segments.get(i + 1).map_or(f64::INFINITY, |n| n.0);
            if *on {
                total += (e.min(t1) - s.max(t0)).max(0.0);
            }
        }
        total
    }
}

/// Deterministic given `(config, profile, seed)`. The stream starts at t = 0.
pub fn generate_eeg(config: &EegConfig, profile: &AttentionProfile, duration_s: f64, seed: u64) -> EegStream {
    let fs = config.fs_hz;
    let n = (duration_s * fs).floor().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // shared phases per (region, rhythm), scattered per channel
    let regions = [Region::Frontal, Region::Central, Region::Parietal, Region::Occipital, Region::Temporal];
    let region_phase: Vec<[f64; 3]> = regions.iter().map(|_| [0, 1, 2].map(|_| rng.random::<f64>() * 2.0 * PI)).collect();

    let attending: Vec<bool> = (0..n).map(|i| profile.is_attending(i as f64 / fs)).collect();
    let r = profile.rhythms;
    let comp_sd = r.noise_uv / (NOISE_POLES.len() as f64).sqrt();

    let data = config
        .channels
        .iter()
        .map(|label| {
            let region = region_of(label);
            let ri = regions.iter().position(|x| *x == region).unwrap();
            let phase: [f64; 3] = [0, 1, 2].map(|b| region_phase[ri][b] + PHASE_JITTER * rng.sample::<f64, _>(StandardNormal));
            let theta_gain = if region == Region::Frontal { 1.0 + profile.depths.theta } else { 1.0 };
            let alpha_gain = if region == Region::Occipital { (1.0 - profile.depths.alpha).max(0.0) } else { 1.0 };

            let mut state: [f64; 3] = [0, 1, 2].map(|_| comp_sd * rng.sample::<f64, _>(StandardNormal));
            let innov: [f64; 3] = NOISE_POLES.map(|a| comp_sd * (1.0 - a * a).sqrt());

            (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    let (gt, ga) = if attending[i] { (theta_gain, alpha_gain) } else { (1.0, 1.0) };
                    let mut noise = 0.0;
                    for c in 0..3 {
                        state[c] = NOISE_POLES[c] * state[c] + innov[c] * rng.sample::<f64, _>(StandardNormal);
                        noise += state[c];
                    }
                    let x = noise
                        + r.theta_uv * gt * (2.0 * PI * THETA_HZ * t + phase[0]).sin()
                        + r.alpha_uv * ga * (2.0 * PI * ALPHA_HZ * t + phase[1]).sin()
                        + r.beta_uv * (2.0 * PI * BETA_HZ * t + phase[2]).sin();
                    x as f32
                })
                .collect()
        })
        .collect();

    EegStream { channels: config.channels.clone(), fs_hz: fs, start_ts: 0.0, data }
}
