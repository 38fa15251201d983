use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Single-hop link: base latency, uniform jitter and independent loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    pub latency_ms: f64,
    /// Half-width of the uniform jitter.
    pub jitter_ms: f64,
    pub loss_rate: f64,
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let ok = self.latency_ms.is_finite()
            && self.latency_ms >= 0.0
            && self.jitter_ms.is_finite()
            && self.jitter_ms >= 0.0
            && (0.0..1.0).contains(&self.loss_rate);
        if ok {
            Ok(())
        } else {
            Err(PipelineError::InvalidLink(format!("{self:?}")))
        }
    }
}

/// A seeded link instance. Every call consumes the same number of draws
/// whether or not the item is lost, so outcomes depend only on seed and
/// call order.
#[derive(Debug, Clone)]
pub struct Link {
    pub model: LinkModel,
    rng: ChaCha8Rng,
    pub sent: u64,
    pub dropped: u64,
}

impl Link {
    pub fn new(model: LinkModel, seed: u64) -> Result<Self, PipelineError> {
        model.validate()?;
        Ok(Link { model, rng: ChaCha8Rng::seed_from_u64(seed), sent: 0, dropped: 0 })
    }

    /// One-way delay in seconds, never negative.
    pub fn delay(&mut self) -> f64 {
        let u: f64 = self.rng.random::<f64>() * 2.0 - 1.0;
        ((self.model.latency_ms + u * self.model.jitter_ms) / 1000.0).max(0.0)
    }

    /// Delivery time and item, or `None` when the link loses it.
    pub fn transmit<T>(&mut self, item: T, now: f64) -> Option<(f64, T)> {
        let lost = self.rng.random::<f64>() < self.model.loss_rate;
        let delay = self.delay();
        self.sent += 1;
        if lost {
            self.dropped += 1;
            None
        } else {
            Some((now + delay, item))
        }
    }
}
