use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Continuous current draw per activity, mA.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadProfile {
    pub gps_ma: f64,
    pub display_ma: f64,
    pub cpu_ma: f64,
    pub radio_ma: f64,
}

impl LoadProfile {
    pub fn total_ma(&self) -> f64 {
        self.gps_ma + self.display_ma + self.cpu_ma + self.radio_ma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub capacity_mah: f64,
    pub drawn_mah: f64,
    pub load: LoadProfile,
}

impl BatteryState {
    pub fn new(capacity_mah: f64, load: LoadProfile) -> Result<Self, PipelineError> {
        let loads = [load.gps_ma, load.display_ma, load.cpu_ma, load.radio_ma];
        if !(capacity_mah.is_finite() && capacity_mah > 0.0) || loads.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(PipelineError::InvalidBattery(format!("capacity {capacity_mah} mAh, load {load:?}")));
        }
        Ok(BatteryState { capacity_mah, drawn_mah: 0.0, load })
    }

    /// Seconds of operation from full until empty; infinite with no load.
    pub fn lifetime_s(&self) -> f64 {
        let ma = self.load.total_ma();
        if ma <= 0.0 {
            f64::INFINITY
        } else {
            self.capacity_mah / ma * 3600.0
        }
    }

    /// Sets the charge drawn after `elapsed_s` seconds of operation. Never
    /// decreases and never exceeds capacity.
    pub fn draw_until(&mut self, elapsed_s: f64) {
        let drawn = (self.load.total_ma() * elapsed_s.max(0.0) / 3600.0).min(self.capacity_mah);
        if drawn > self.drawn_mah {
            self.drawn_mah = drawn;
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.drawn_mah >= self.capacity_mah
    }

    pub fn remaining_fraction(&self) -> f64 {
        1.0 - self.drawn_mah / self.capacity_mah
    }
}
