//! The point-to-point link: propagation delay, flit serialization, loss,
//! and wire jitter.

use crate::costmodel::{CostClass, JitterModel};
use crate::rng::SimRng;
use crate::wire::serialization_ns;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// One-way propagation delay, ns.
    pub delay_ns: f64,
    pub bandwidth_gbps: f64,
    pub loss_rate: f64,
    pub jitter_factor: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig { delay_ns: 100.0, bandwidth_gbps: 400.0, loss_rate: 0.0, jitter_factor: 0.0 }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delay_ns >= 0.0) || !(self.bandwidth_gbps > 0.0) {
            return Err("link delay must be >= 0 and bandwidth > 0".into());
        }
        if !(0.0..=1.0).contains(&self.loss_rate) || !(self.jitter_factor >= 0.0) {
            return Err("loss rate must be in [0, 1] and jitter >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkOutcome {
    Arrive { delay_ns: f64 },
    Drop,
}

/// Send `flits` across the link. The loss draw comes first so that the
/// drop pattern does not depend on whether jitter is enabled.
pub fn link_transmit(link: &LinkConfig, flits: u32, loss_rng: &mut SimRng, jitter_rng: &mut SimRng) -> LinkOutcome {
    if link.loss_rate > 0.0 && loss_rng.random::<f64>() < link.loss_rate {
        return LinkOutcome::Drop;
    }
    let jitter = JitterModel { factor: link.jitter_factor }.sample_jitter(jitter_rng, CostClass::Wire, link.delay_ns);
    LinkOutcome::Arrive { delay_ns: link.delay_ns + serialization_ns(flits, link.bandwidth_gbps) + jitter }
}
