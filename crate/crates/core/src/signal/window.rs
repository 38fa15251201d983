use serde::{Deserialize, Serialize};

use super::{EegConfig, SignalError};
use crate::AttentionLabel;

/// Multichannel EEG samples in microvolts, channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegStream {
    pub channels: Vec<String>,
    pub fs_hz: f64,
    pub start_ts: f64,
    pub data: Vec<Vec<f32>>,
}

impl EegStream {
    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fs_hz
    }

    /// Frame `i` across channels.
    pub fn frame(&self, i: usize) -> impl Iterator<Item = f32> + '_ {
        self.data.iter().map(move |ch| ch[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegWindow {
    pub start_ts: f64,
    pub fs_hz: f64,
    /// channels × samples, μV.
    pub samples: Vec<Vec<f32>>,
    pub label: Option<AttentionLabel>,
}

impl EegWindow {
    pub fn n_samples(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs_hz
    }

    pub fn mid_ts(&self) -> f64 {
        self.start_ts + self.duration_s() / 2.0
    }
}

/// Cuts a stream into fixed windows with hop `window_s · (1 − overlap)`.
/// A trailing partial window is dropped.
pub fn window_stream(stream: &EegStream, config: &EegConfig) -> Result<Vec<EegWindow>, SignalError> {
    let win = config.window_samples();
    let hop = config.hop_samples().max(1);
    let n = stream.len();
    if n < win || win == 0 {
        return Err(SignalError::StreamTooShort { samples: n, window: win });
    }
    let count = (n - win) / hop + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * hop;
            EegWindow {
                start_ts: stream.start_ts + start as f64 / stream.fs_hz,
                fs_hz: stream.fs_hz,
                samples: stream.data.iter().map(|ch| ch[start..start + win].to_vec()).collect(),
                label: None,
            }
        })
        .collect())
}
