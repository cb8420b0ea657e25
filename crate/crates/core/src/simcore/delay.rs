use serde::{Deserialize, Serialize};

use super::SimError;
use crate::topo::{Link, Medium};

/// Per-medium propagation constants in microseconds per kilometre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConstants {
    pub fibre_us_per_km: f64,
    pub copper_us_per_km: f64,
}

impl Default for DelayConstants {
    fn default() -> Self {
        DelayConstants {
            fibre_us_per_km: 4.9,
            copper_us_per_km: 5.4,
        }
    }
}

impl DelayConstants {
    pub fn check(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.fibre_us_per_km) && ok(self.copper_us_per_km) {
            Ok(())
        } else {
            Err(format!("propagation constants must be positive: {self:?}"))
        }
    }

    pub fn per_km(&self, medium: Medium) -> f64 {
        match medium {
            Medium::Fibre => self.fibre_us_per_km,
            Medium::Copper => self.copper_us_per_km,
        }
    }
}

pub fn propagation_delay(link: &Link, c: &DelayConstants) -> f64 {
    link.length_km * c.per_km(link.medium)
}

/// Serialisation time in microseconds.
pub fn transmission_delay(size_bytes: u32, rate_gbps: f64) -> Result<f64, SimError> {
    if !(rate_gbps > 0.0) {
        return Err(SimError::InvalidArgument(format!("link rate {rate_gbps} Gbps")));
    }
    Ok(size_bytes as f64 * 8.0 / (rate_gbps * 1e3))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JitterKind {
    None,
    #[default]
    Uniform,
}

/// Per-handling processing jitter, drawn at every L3 node a packet visits.
/// A node never jitters by more than its own processing delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterModel {
    pub kind: JitterKind,
    pub half_width_us: f64,
}

impl Default for JitterModel {
    fn default() -> Self {
        JitterModel {
            kind: JitterKind::Uniform,
            half_width_us: 30.0,
        }
    }
}

impl JitterModel {
    pub fn none() -> Self {
        JitterModel {
            kind: JitterKind::None,
            half_width_us: 0.0,
        }
    }

    pub fn uniform(half_width_us: f64) -> Self {
        JitterModel {
            kind: JitterKind::Uniform,
            half_width_us,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.half_width_us.is_finite() && self.half_width_us >= 0.0) {
            return Err(format!("jitter half width {} must be >= 0", self.half_width_us));
        }
        if self.kind == JitterKind::None && self.half_width_us != 0.0 {
            return Err("jitter kind None requires half_width_us = 0".into());
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.kind == JitterKind::None || self.half_width_us == 0.0
    }
}
