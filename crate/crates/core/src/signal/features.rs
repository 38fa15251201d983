use serde::{Deserialize, Serialize};

use super::{band_powers, Band, EegConfig, EegWindow, SignalError};

/// Band-power summary of one window, ordered channel-major then band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ts: f64,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Column names matching [`extract_features`] order, e.g. `O1_alpha`.
pub fn feature_names(config: &EegConfig, bands: &[Band]) -> Vec<String> {
    config.channels.iter().flat_map(|c| bands.iter().map(move |b| format!("{c}_{}", b.name.as_str()))).collect()
}

pub fn extract_features(window: &EegWindow, config: &EegConfig, bands: &[Band]) -> Result<FeatureVector, SignalError> {
    if window.samples.len() != config.channels.len() {
        return Err(SignalError::DimensionMismatch { expected: config.channels.len(), got: window.samples.len() });
    }
    let per_channel = band_powers(window, bands)?;
    Ok(FeatureVector { ts: window.start_ts, values: per_channel.into_iter().flatten().collect() })
}
