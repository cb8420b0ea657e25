use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ProbeError;
use crate::routing::{compute_tables, default_tdm_schedules, route};
use crate::simcore::{propagation_delay, transmission_delay, DelayConstants};
use crate::topo::{NodeKind, TopoError, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    pub per_node_rtt_us: f64,
    pub core_to_olt_extra_us: f64,
    pub end_to_end_max_us: f64,
    pub range_min_us: f64,
    pub range_max_us: f64,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            per_node_rtt_us: 200.0,
            core_to_olt_extra_us: 700.0,
            end_to_end_max_us: 2000.0,
            range_min_us: 195.8,
            range_max_us: 1761.9,
        }
    }
}

impl CalibrationTargets {
    pub fn check(&self) -> Result<(), String> {
        if !(self.range_min_us < self.range_max_us && self.range_max_us <= self.end_to_end_max_us) {
            return Err(format!("inconsistent RTT range: {self:?}"));
        }
        if self.per_node_rtt_us < 0.0 || self.core_to_olt_extra_us < 0.0 {
            return Err("RTT targets must be nonnegative".into());
        }
        Ok(())
    }

    /// Incremental RTT wanted at a hop: the base per-node figure, plus the
    /// extra for the hop that lands on the OLT.
    pub fn target_for(&self, kind: NodeKind) -> f64 {
        match kind {
            NodeKind::Olt => self.per_node_rtt_us + self.core_to_olt_extra_us,
            _ => self.per_node_rtt_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Forwarding hops in path order.
    pub hops: Vec<String>,
    /// Incremental RTT target per hop.
    pub targets_us: Vec<f64>,
    pub delays: BTreeMap<String, f64>,
}

impl Calibration {
    pub fn apply(&self, t: &mut Topology) -> Result<(), TopoError> {
        for (id, d) in &self.delays {
            t.set_processing_delay(id, *d)?;
        }
        Ok(())
    }
}

/// Solves hop by hop along the `src` -> `dst` route. At zero jitter a hop's
/// incremental RTT is twice the links, transparent elements and its own
/// processing between it and the previous hop, plus the expected TDM wait of
/// the upstream crossing; the first hop also carries the source's own
/// processing twice. Paths are taken as symmetric.
pub fn calibrate_processing_delays(
    t: &Topology,
    src: &str,
    dst: &str,
    targets: &CalibrationTargets,
    constants: &DelayConstants,
    probe_size_bytes: u32,
) -> Result<Calibration, ProbeError> {
    targets.check().map_err(ProbeError::InvalidArgument)?;
    constants.check().map_err(ProbeError::InvalidArgument)?;
    for id in [src, dst] {
        if t.node(id).is_none() {
            return Err(ProbeError::UnknownNode(id.into()));
        }
    }
    let tables = compute_tables(t);
    let r = route(&tables, t, src, dst).map_err(|_| ProbeError::Unreachable {
        src: src.into(),
        dst: dst.into(),
    })?;
    let tdm = default_tdm_schedules(t);
    let kind = |id: &str| t.node(id).expect("route node").kind();
    let proc_of = |id: &str| t.node(id).expect("route node").processing_delay_us;

    let mut out = Calibration {
        hops: Vec::new(),
        targets_us: Vec::new(),
        delays: BTreeMap::new(),
    };
    let mut fixed = 2.0 * proc_of(src);
    for (i, id) in r.nodes.iter().enumerate().skip(1) {
        let link = t.link(&r.links[i - 1]).expect("route link");
        fixed += 2.0 * (propagation_delay(link, constants) + transmission_delay(probe_size_bytes, link.rate_gbps)?);
        let prev = r.nodes[i - 1].as_str();
        // whichever end of the link is a registered sender waits for its slot
        for (sender, coupler) in [(prev, id.as_str()), (id.as_str(), prev)] {
            if let Some(w) = tdm.get(coupler).and_then(|s| s.mean_wait_us(sender)) {
                fixed += w;
            }
        }
        let k = kind(id);
        if !k.is_l3() {
            fixed += 2.0 * proc_of(id);
            continue;
        }
        let target = targets.target_for(k);
        if target < fixed {
            return Err(ProbeError::Infeasible {
                node: id.clone(),
                residual_us: fixed - target,
            });
        }
        out.hops.push(id.clone());
        out.targets_us.push(target);
        out.delays.insert(id.clone(), (target - fixed) / 2.0);
        fixed = 0.0;
    }
    Ok(out)
}
