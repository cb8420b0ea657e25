//! Discrete-event packet engine.
//!
//! Time is kept in integer picoseconds so that event ordering never depends
//! on floating-point accumulation; microseconds appear only at the API edge.

use std::fmt;
use std::ops::{Add, Sub};

use thiserror::Error;

mod delay;
mod engine;
mod packet;

pub use delay::{propagation_delay, transmission_delay, DelayConstants, JitterKind, JitterModel};
pub use engine::{Conservation, Engine, SimOptions, TraceRecord};
pub use packet::{DropReason, NodeIx, Packet, PacketId, PacketKind, PacketStatus, DEFAULT_TTL};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ps(ps: u64) -> Self {
        SimTime(ps)
    }

    /// Rounds to the nearest picosecond; negative input clamps to zero.
    pub fn from_us(us: f64) -> Self {
        SimTime((us * 1e6).round().max(0.0) as u64)
    }

    pub fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_us(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}
