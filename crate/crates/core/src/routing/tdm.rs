use std::collections::{BTreeMap, BTreeSet};

use super::RoutingError;
use crate::simcore::SimTime;
use crate::topo::{NodeKind, Topology};

pub const DEFAULT_FRAME_US: f64 = 125.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Grant {
    pub sender: String,
    pub start_us: f64,
    pub len_us: f64,
}

/// Round-robin upstream grants through a TDM coupler. Sender `i` owns
/// `[i * slot, (i + 1) * slot)` of every frame. A packet that reaches the
/// coupler inside its sender's slot goes straight through; otherwise it
/// waits for the next slot start.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmSchedule {
    pub frame_us: f64,
    pub grants: Vec<Grant>,
}

pub fn build_tdm_schedule(
    senders: &[String],
    frame_us: f64,
    slot_us: f64,
) -> Result<TdmSchedule, RoutingError> {
    if senders.is_empty() {
        return Err(RoutingError::InvalidArgument("no TDM senders".into()));
    }
    if !(frame_us > 0.0 && slot_us > 0.0) {
        return Err(RoutingError::InvalidArgument(format!(
            "frame {frame_us} us and slot {slot_us} us must be positive"
        )));
    }
    if senders.len() as f64 * slot_us > frame_us {
        return Err(RoutingError::InvalidArgument(format!(
            "{} slots of {slot_us} us do not fit a {frame_us} us frame",
            senders.len()
        )));
    }
    let grants = senders
        .iter()
        .enumerate()
        .map(|(i, s)| Grant {
            sender: s.clone(),
            start_us: i as f64 * slot_us,
            len_us: slot_us,
        })
        .collect();
    Ok(TdmSchedule { frame_us, grants })
}

impl TdmSchedule {
    pub fn grant(&self, sender: &str) -> Option<&Grant> {
        self.grants.iter().find(|g| g.sender == sender)
    }

    /// Earliest time the sender may use the upstream channel at or after
    /// `arrival`. `None` for unregistered senders.
    pub fn release(&self, sender: &str, arrival: SimTime) -> Option<SimTime> {
        let g = self.grant(sender)?;
        let frame = SimTime::from_us(self.frame_us).as_ps();
        let start = SimTime::from_us(g.start_us).as_ps();
        let end = SimTime::from_us(g.start_us + g.len_us).as_ps();
        let t = arrival.as_ps();
        let pos = t % frame;
        let frame_base = t - pos;
        let ps = if pos >= start && pos < end {
            t
        } else if pos < start {
            frame_base + start
        } else {
            frame_base + frame + start
        };
        Some(SimTime::from_ps(ps))
    }

    pub fn release_us(&self, sender: &str, arrival_us: f64) -> Option<f64> {
        self.release(sender, SimTime::from_us(arrival_us))
            .map(SimTime::as_us)
    }

    /// Mean wait for arrivals uniformly spread over the frame.
    pub fn mean_wait_us(&self, sender: &str) -> Option<f64> {
        let g = self.grant(sender)?;
        let idle = self.frame_us - g.len_us;
        Some(idle * idle / (2.0 * self.frame_us))
    }
}

/// One schedule per coupler: every non-OLT neighbour is a sender, frame
/// [`DEFAULT_FRAME_US`], slot = frame / senders.
pub fn default_tdm_schedules(t: &Topology) -> BTreeMap<String, TdmSchedule> {
    let mut out = BTreeMap::new();
    for c in t.nodes().filter(|n| n.kind() == NodeKind::Coupler) {
        let senders: BTreeSet<String> = t
            .neighbours(&c.id)
            .filter(|(_, o)| t.node(o).map(|n| n.kind()) != Some(NodeKind::Olt))
            .map(|(_, o)| o.to_string())
            .collect();
        let senders: Vec<String> = senders.into_iter().collect();
        if senders.is_empty() {
            continue;
        }
        let slot = DEFAULT_FRAME_US / senders.len() as f64;
        if let Ok(s) = build_tdm_schedule(&senders, DEFAULT_FRAME_US, slot) {
            out.insert(c.id.clone(), s);
        }
    }
    out
}
