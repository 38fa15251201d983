//! Portable EEG headsets, kept as data. The session engine defaults to a
//! 250 Hz, 8-channel profile, the most common configuration below.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SamplingRate {
    Fixed { hz: f64 },
    Options { hz: Vec<f64> },
    Range { min_hz: f64, max_hz: f64 },
    Below { hz: f64 },
    UpTo { hz: f64 },
}

impl SamplingRate {
    /// Whether the device can be run at `hz`.
    pub fn supports(&self, hz: f64) -> bool {
        match self {
            SamplingRate::Fixed { hz: f } => *f == hz,
            SamplingRate::Options { hz: fs } => fs.contains(&hz),
            SamplingRate::Range { min_hz, max_hz } => (*min_hz..=*max_hz).contains(&hz),
            SamplingRate::Below { hz: f } => hz > 0.0 && hz < *f,
            SamplingRate::UpTo { hz: f } => hz > 0.0 && hz <= *f,
        }
    }

    pub fn max_hz(&self) -> f64 {
        match self {
            SamplingRate::Fixed { hz } | SamplingRate::Below { hz } | SamplingRate::UpTo { hz } => *hz,
            SamplingRate::Options { hz } => hz.iter().copied().fold(0.0, f64::max),
            SamplingRate::Range { max_hz, .. } => *max_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelCount {
    Fixed { n: u32 },
    Options { n: Vec<u32> },
    Range { min: u32, max: u32 },
}

impl ChannelCount {
    pub fn supports(&self, n: u32) -> bool {
        match self {
            ChannelCount::Fixed { n: k } => *k == n,
            ChannelCount::Options { n: ks } => ks.contains(&n),
            ChannelCount::Range { min, max } => (*min..=*max).contains(&n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Price {
    Usd { amount: f64 },
    OnQuote,
    NotAvailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub brand_product: String,
    pub wireless: bool,
    /// Radio named for wireless devices, e.g. "BLE".
    pub link: Option<String>,
    pub sampling: SamplingRate,
    pub channels: ChannelCount,
    pub noise_reduction: Option<String>,
    pub price: Price,
}

impl DeviceProfile {
    pub fn price_usd(&self) -> Option<f64> {
        match self.price {
            Price::Usd { amount } => Some(amount),
            _ => None,
        }
    }
}

fn row(
    brand_product: &str,
    link: Option<&str>,
    wireless: bool,
    sampling: SamplingRate,
    channels: ChannelCount,
    noise_reduction: Option<&str>,
    price: Price,
) -> DeviceProfile {
    DeviceProfile {
        brand_product: brand_product.into(),
        wireless,
        link: link.map(Into::into),
        sampling,
        channels,
        noise_reduction: noise_reduction.map(Into::into),
        price,
    }
}

/// The commercial low-cost portable EEG devices considered for the headset.
pub fn device_registry() -> Vec<DeviceProfile> {
    use ChannelCount as C;
    use SamplingRate as S;
    vec![
        row(
            "ANT Neuro mini-serie",
            None,
            false,
            S::Below { hz: 2048.0 },
            C::Fixed { n: 8 },
            Some("active shielding technology for reduction of environmental interference"),
            Price::OnQuote,
        ),
        row("Open BCI", Some("BLE/WiFi"), true, S::Fixed { hz: 250.0 }, C::Options { n: vec![8, 16, 21] }, None, Price::Usd { amount: 1000.0 }),
        row(
            "mBrainTrain",
            Some("BT-EDR"),
            true,
            S::Options { hz: vec![250.0, 500.0] },
            C::Fixed { n: 24 },
            Some("high SNR claimed"),
            Price::Usd { amount: 66750.0 },
        ),
        row("Unicorn EEG", Some("BT"), true, S::Fixed { hz: 250.0 }, C::Fixed { n: 8 }, Some("high SNR claimed"), Price::Usd { amount: 1200.0 }),
        row("Wearable Sensing", Some("BT"), true, S::Fixed { hz: 300.0 }, C::Range { min: 7, max: 24 }, None, Price::NotAvailable),
        row(
            "Emotiv EPOC-X",
            Some("BLE"),
            true,
            S::Range { min_hz: 128.0, max_hz: 256.0 },
            C::Fixed { n: 14 },
            Some("notch filter"),
            Price::Usd { amount: 850.0 },
        ),
        row("Bitbrain Hero", Some("BT 2.1+EDR"), true, S::Fixed { hz: 250.0 }, C::Fixed { n: 9 }, Some("active shielding"), Price::OnQuote),
        row("Brain Live Amp", None, true, S::UpTo { hz: 1000.0 }, C::Range { min: 8, max: 32 }, None, Price::Usd { amount: 18200.0 }),
        row("Neurosky - MindWave", None, true, S::Fixed { hz: 512.0 }, C::Fixed { n: 1 }, None, Price::Usd { amount: 180.0 }),
    ]
}

pub fn find_device(name: &str) -> Option<DeviceProfile> {
    device_registry().into_iter().find(|d| d.brand_product.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_rows() {
        let r = device_registry();
        assert_eq!(r.len(), 9);
        assert_eq!(r.iter().filter(|d| !d.wireless).count(), 1);
        assert_eq!(find_device("open bci").unwrap().price_usd(), Some(1000.0));
        assert_eq!(find_device("Emotiv EPOC-X").unwrap().price_usd(), Some(850.0));
        assert_eq!(find_device("Bitbrain Hero").unwrap().price, Price::OnQuote);
        assert_eq!(find_device("Wearable Sensing").unwrap().price, Price::NotAvailable);
        for d in &r {
            assert!(d.sampling.max_hz() > 0.0);
        }
    }

    #[test]
    fn default_profile_is_the_common_one() {
        let fits: Vec<_> = device_registry().into_iter().filter(|d| d.sampling.supports(250.0) && d.channels.supports(8)).map(|d| d.brand_product).collect();
        assert_eq!(fits, ["ANT Neuro mini-serie", "Open BCI", "Unicorn EEG", "Brain Live Amp"]);
        assert!(!find_device("ANT Neuro mini-serie").unwrap().sampling.supports(2048.0));
    }

    #[test]
    fn serde_round_trip() {
        let r = device_registry();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<Vec<DeviceProfile>>(&text).unwrap(), r);
    }
}
