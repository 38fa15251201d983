//! Hann-tapered periodogram and band power.
//!
//! Normalisation: the one-sided periodogram bins sum to the mean square of
//! the tapered signal, so band powers over a full partition of
//! `[0, fs/2]` add up to that mean square.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{EegWindow, SignalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Theta,
    Alpha,
    Beta,
    Custom,
}

impl BandName {
    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: BandName,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub const THETA: Band = Band { name: BandName::Theta, lo_hz: 4.0, hi_hz: 8.0 };
    pub const ALPHA: Band = Band { name: BandName::Alpha, lo_hz: 8.0, hi_hz: 13.0 };
    pub const BETA: Band = Band { name: BandName::Beta, lo_hz: 13.0, hi_hz: 30.0 };

    pub fn standard() -> [Band; 3] {
        [Band::THETA, Band::ALPHA, Band::BETA]
    }

    pub fn custom(lo_hz: f64, hi_hz: f64) -> Band {
        Band { name: BandName::Custom, lo_hz, hi_hz }
    }

    fn check(&self, fs: f64) -> Result<(), SignalError> {
        let nyquist = fs / 2.0;
        if !(self.lo_hz >= 0.0 && self.lo_hz < self.hi_hz && self.hi_hz <= nyquist) {
            return Err(SignalError::BandOutOfRange { name: self.name.as_str().into(), lo: self.lo_hz, hi: self.hi_hz, nyquist });
        }
        Ok(())
    }

    /// Bin membership: `lo <= f < hi`; a band ending at Nyquist also takes
    /// the Nyquist bin.
    fn contains(&self, f: f64, nyquist: f64) -> bool {
        f >= self.lo_hz && (f < self.hi_hz || (self.hi_hz >= nyquist && f <= nyquist))
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// One-sided periodogram `(frequency_hz, power)` of a Hann-tapered signal.
pub fn periodogram(signal: &[f32], fs: f64) -> Vec<(f64, f64)> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let w = hann(n);
    let mut buf: Vec<Complex<f64>> = signal.iter().zip(&w).map(|(x, w)| Complex::new(*x as f64 * w, 0.0)).collect();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n).process(&mut buf));
    let n2 = (n * n) as f64;
    (0..=n / 2)
        .map(|k| {
            let two_sided_pair = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            let p = buf[k].norm_sqr() / n2 * if two_sided_pair { 2.0 } else { 1.0 };
            (k as f64 * fs / n as f64, p)
        })
        .collect()
}

/// Mean band power per channel, μV².
pub fn band_power(window: &EegWindow, band: &Band) -> Result<Vec<f64>, SignalError> {
    band.check(window.fs_hz)?;
    let nyquist = window.fs_hz / 2.0;
    Ok(window.samples.iter().map(|ch| periodogram(ch, window.fs_hz).into_iter().filter(|(f, _)| band.contains(*f, nyquist)).map(|(_, p)| p).sum()).collect())
}

/// Band powers for several bands at once, one periodogram per channel.
/// Result is channel-major: `out[channel][band]`.
pub fn band_powers(window: &EegWindow, bands: &[Band]) -> Result<Vec<Vec<f64>>, SignalError> {
    for b in bands {
        b.check(window.fs_hz)?;
    }
    let nyquist = window.fs_hz / 2.0;
    Ok(window
        .samples
        .iter()
        .map(|ch| {
            let pg = periodogram(ch, window.fs_hz);
            bands.iter().map(|b| pg.iter().filter(|(f, _)| b.contains(*f, nyquist)).map(|(_, p)| p).sum()).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn window(channels: Vec<Vec<f32>>, fs: f64, start: f64) -> EegWindow {
        EegWindow { start_ts: start, fs_hz: fs, samples: channels, label: None }
    }

    fn tone(fs: f64, n: usize, f: f64, amp: f64, t0: f64) -> Vec<f32> {
        (0..n).map(|i| (amp * (2.0 * PI * f * (t0 + i as f64 / fs)).sin()) as f32).collect()
    }

    /// Direct-summation DFT band power, independent of the FFT path.
    fn dft_band_power(x: &[f32], fs: f64, lo: f64, hi: f64) -> f64 {
        let n = x.len();
        let w: Vec<f64> = (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect();
        let mut total = 0.0;
        for k in 0..=n / 2 {
            let f = k as f64 * fs / n as f64;
            if f < lo || f >= hi {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for (i, xi) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                re += *xi as f64 * w[i] * ang.cos();
                im += *xi as f64 * w[i] * ang.sin();
            }
            let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            total += scale * (re * re + im * im) / (n * n) as f64;
        }
        total
    }

    #[test]
    fn zero_window_has_zero_power() {
        let w = window(vec![vec![0.0; 500]; 3], 250.0, 0.0);
        assert_eq!(band_power(&w, &Band::ALPHA).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn unit_tone_matches_direct_dft_oracle() {
        let fs = 250.0;
        let x = tone(fs, 500, 10.0, 1.0, 0.0);
        let oracle = dft_band_power(&x, fs, 8.0, 13.0);
        let got = band_power(&window(vec![x], fs, 0.0), &Band::ALPHA).unwrap()[0];
        assert!((got - oracle).abs() / oracle < 0.01, "{got} vs {oracle}");
        // mean square of a Hann-tapered unit sinusoid: 0.5 · mean(w²) = 0.5 · 3/8
        assert!((got - 0.1875).abs() / 0.1875 < 0.01, "{got}");
    }

    #[test]
    fn tone_power_scales_with_amplitude_squared() {
        let fs = 250.0;
        let a = band_power(&window(vec![tone(fs, 500, 10.0, 1.0, 0.0)], fs, 0.0), &Band::ALPHA).unwrap()[0];
        let b = band_power(&window(vec![tone(fs, 500, 10.0, 7.0, 0.0)], fs, 0.0), &Band::ALPHA).unwrap()[0];
        assert!((b / a - 49.0).abs() < 1e-3);
    }

    #[test]
    fn parseval_over_full_partition() {
        let fs = 250.0;
        let x: Vec<f32> = (0..500).map(|i| ((i * 7919 % 101) as f32 - 50.0) / 7.0 + (i as f32 * 0.13).sin() * 3.0).collect();
        let n = x.len();
        let w = hann(n);
        let mean_square: f64 = x.iter().zip(&w).map(|(x, w)| (*x as f64 * w).powi(2)).sum::<f64>() / n as f64;
        let edges = [0.0, 4.0, 8.0, 13.0, 30.0, 125.0];
        let win = window(vec![x], fs, 0.0);
        let total: f64 = edges.windows(2).map(|e| band_power(&win, &Band::custom(e[0], e[1])).unwrap()[0]).sum();
        assert!((total - mean_square).abs() / mean_square < 1e-6, "{total} vs {mean_square}");
    }

    #[test]
    fn odd_length_parseval() {
        let x: Vec<f32> = (0..251).map(|i| (i as f32 * 0.37).cos() + 0.25).collect();
        let n = x.len();
        let w = hann(n);
        let ms: f64 = x.iter().zip(&w).map(|(x, w)| (*x as f64 * w).powi(2)).sum::<f64>() / n as f64;
        let total: f64 = periodogram(&x, 100.0).iter().map(|(_, p)| p).sum();
        assert!((total - ms).abs() / ms < 1e-9);
    }

    #[test]
    fn tone_power_independent_of_start_time() {
        let fs = 250.0;
        let base = band_power(&window(vec![tone(fs, 500, 10.0, 5.0, 0.0)], fs, 0.0), &Band::ALPHA).unwrap()[0];
        for t0 in [0.013, 0.37, 1.0, 12.345] {
            let p = band_power(&window(vec![tone(fs, 500, 10.0, 5.0, t0)], fs, t0), &Band::ALPHA).unwrap()[0];
            assert!((p - base).abs() / base < 0.01, "t0={t0}: {p} vs {base}");
        }
    }

    #[test]
    fn band_out_of_range() {
        let w = window(vec![vec![0.0; 500]], 250.0, 0.0);
        assert!(matches!(band_power(&w, &Band::custom(100.0, 200.0)), Err(SignalError::BandOutOfRange { .. })));
        assert!(matches!(band_power(&w, &Band::custom(10.0, 5.0)), Err(SignalError::BandOutOfRange { .. })));
    }
}
