//! EEG stream model: synthetic generator, windowing, band-power features and
//! GPS-driven window labeling.

mod features;
mod generator;
mod labeling;
pub mod sidecar;
mod spectrum;
mod window;

pub use features::{extract_features, feature_names, FeatureVector};
pub use generator::{generate_eeg, AttentionProfile, ModulationDepths, RhythmAmplitudes};
pub use labeling::{label_windows, window_label, STRADDLE_LIMIT};
pub use spectrum::{band_power, band_powers, periodogram, Band, BandName};
pub use window::{window_stream, EegStream, EegWindow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid EEG configuration: {0}")]
    InvalidConfig(String),
    #[error("stream of {samples} samples is shorter than one window ({window})")]
    StreamTooShort { samples: usize, window: usize },
    #[error("band {name} [{lo}, {hi}) Hz is outside [0, {nyquist}] Hz")]
    BandOutOfRange { name: String, lo: f64, hi: f64, nyquist: f64 },
    #[error("window [{start}, {end}] s lies outside the trajectory span")]
    TimestampOutOfRange { start: f64, end: f64 },
    #[error("feature vector has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Electrode labels of the international 10-20 system and its 10-10
/// extension.
pub const ELECTRODE_LABELS: &[&str] = &[
    "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F9", "F7", "F5", "F3", "F1", "Fz", "F2", "F4", "F6", "F8", "F10", "FT9", "FT7", "FC5", "FC3",
    "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "FT10", "T9", "T7", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "T8", "T10", "TP9", "TP7", "CP5", "CP3", "CP1",
    "CPz", "CP2", "CP4", "CP6", "TP8", "TP10", "P9", "P7", "P5", "P3", "P1", "Pz", "P2", "P4", "P6", "P8", "P10", "PO7", "PO3", "POz", "PO4", "PO8", "O1",
    "Oz", "O2", "Iz", "T3", "T4", "T5", "T6", "A1", "A2", "M1", "M2",
];

/// Scalp region used by the generator's attention modulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Frontal,
    Central,
    Parietal,
    Occipital,
    Temporal,
}

pub fn region_of(label: &str) -> Region {
    let prefix: String = label.chars().take_while(|c| c.is_ascii_alphabetic() && *c != 'z').collect();
    match prefix.as_str() {
        "Fp" | "AF" | "F" => Region::Frontal,
        "O" | "PO" | "I" => Region::Occipital,
        "P" | "CP" => Region::Parietal,
        "T" | "FT" | "TP" | "A" | "M" => Region::Temporal,
        _ => Region::Central,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EegConfig {
    pub channels: Vec<String>,
    pub fs_hz: f64,
    pub window_s: f64,
    pub overlap: f64,
}

impl Default for EegConfig {
    fn default() -> Self {
        EegConfig {
            channels: ["Fp1", "Fp2", "C3", "C4", "P3", "P4", "O1", "O2"].iter().map(|s| s.to_string()).collect(),
            fs_hz: 250.0,
            window_s: 2.0,
            overlap: 0.5,
        }
    }
}

impl EegConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |m: String| Err(SignalError::InvalidConfig(m));
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        if let Some(c) = self.channels.iter().find(|c| !ELECTRODE_LABELS.contains(&c.as_str())) {
            return bad(format!("{c} is not a 10-20/10-10 electrode label"));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(c) = self.channels.iter().find(|c| !seen.insert(c.as_str())) {
            return bad(format!("duplicate channel {c}"));
        }
        let top = Band::standard().iter().map(|b| b.hi_hz).fold(0.0, f64::max);
        if !(self.fs_hz.is_finite() && self.fs_hz > 2.0 * top) {
            return bad(format!("sampling rate {} Hz must exceed {} Hz", self.fs_hz, 2.0 * top));
        }
        if !(self.window_s > 0.0 && (self.window_s * self.fs_hz - (self.window_s * self.fs_hz).round()).abs() < 1e-9) {
            return bad(format!("window of {} s is not a whole number of samples", self.window_s));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad(format!("overlap {} must lie in [0, 1)", self.overlap));
        }
        if self.hop_samples() == 0 {
            return bad("window hop rounds to zero samples".into());
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.window_s * self.fs_hz).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.window_samples() as f64 * (1.0 - self.overlap)).round() as usize
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_samples() as f64 / self.fs_hz
    }
}
