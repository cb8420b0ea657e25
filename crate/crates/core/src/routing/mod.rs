//! Forwarding tables, end-to-end routes, AWGR wavelength routing and the TDM
//! upstream grant schedule.
//!
//! Tables are destination-based and hop-count shortest, computed over the
//! graph in which plain servers and cameras never relay traffic. That single
//! rule is what forces inter-rack traffic through the source rack's gateway
//! and inter-cell traffic through the PON and core segments. Among equal
//! length next hops the smallest node id wins, then the smallest link id.

use std::collections::{BTreeMap, VecDeque};
use std::io;

use serde::Serialize;
use thiserror::Error;

use crate::addressing::{validate_plan, AddressPlan};
use crate::topo::Topology;

mod awgr;
mod tdm;

pub use awgr::{assign_wavelengths, awgr_output_port, awgr_ports, write_wavelength_csv, AwgrPorts, WavelengthAssignment};
pub use tdm::{build_tdm_schedule, default_tdm_schedules, Grant, TdmSchedule, DEFAULT_FRAME_US};

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("no route from {src} to {dst}")]
    Unreachable { src: String, dst: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("wavelengths exhausted on input port {port} of {awgr} (flow {flow})")]
    Exhausted { awgr: String, port: usize, flow: usize },
    #[error("address plan does not fit the topology: {0}")]
    BadPlan(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Per-node next hops: `tables[node][dst] = (next node, link)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForwardingTables {
    tables: BTreeMap<String, BTreeMap<String, (String, String)>>,
}

impl ForwardingTables {
    pub fn next_hop(&self, at: &str, dst: &str) -> Option<(&str, &str)> {
        self.tables
            .get(at)?
            .get(dst)
            .map(|(n, l)| (n.as_str(), l.as_str()))
    }

    pub fn table(&self, at: &str) -> Option<&BTreeMap<String, (String, String)>> {
        self.tables.get(at)
    }

    /// Drops one entry; used to exercise black-hole handling.
    pub fn remove_entry(&mut self, at: &str, dst: &str) -> bool {
        self.tables
            .get_mut(at)
            .map(|t| t.remove(dst).is_some())
            .unwrap_or(false)
    }

    pub fn entries(&self) -> usize {
        self.tables.values().map(|t| t.len()).sum()
    }
}

/// Tables for every reachable (node, destination) pair; unreachable pairs
/// simply have no entry.
pub fn compute_tables(t: &Topology) -> ForwardingTables {
    let mut out = ForwardingTables::default();
    for n in t.nodes() {
        out.tables.insert(n.id.clone(), BTreeMap::new());
    }
    for dst in t.nodes() {
        let dist = distances_to(t, &dst.id);
        for v in t.nodes() {
            if v.id == dst.id {
                continue;
            }
            let Some(&dv) = dist.get(v.id.as_str()) else {
                continue;
            };
            let best = t
                .neighbours(&v.id)
                .filter(|(_, u)| {
                    dist.get(u).copied() == Some(dv - 1) && may_relay(t, u, &dst.id)
                })
                .map(|(l, u)| (u, l.id.as_str()))
                .min();
            if let Some((u, l)) = best {
                out.tables
                    .get_mut(&v.id)
                    .unwrap()
                    .insert(dst.id.clone(), (u.to_string(), l.to_string()));
            }
        }
    }
    out
}

fn may_relay(t: &Topology, node: &str, dst: &str) -> bool {
    node == dst || t.node(node).map(|n| n.kind().can_transit()).unwrap_or(false)
}

/// Hop distance of every node to `dst` when only relay-capable nodes may be
/// intermediate.
fn distances_to<'a>(t: &'a Topology, dst: &'a str) -> BTreeMap<&'a str, usize> {
    let mut dist = BTreeMap::from([(dst, 0usize)]);
    let mut queue = VecDeque::from([dst]);
    while let Some(u) = queue.pop_front() {
        if !may_relay(t, u, dst) {
            continue;
        }
        let du = dist[u];
        for (_, v) in t.neighbours(u) {
            if t.node(v).is_some() && !dist.contains_key(v) {
                dist.insert(v, du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Checked table computation: the plan must fit the topology and every
/// server pair must be connected.
pub fn compute_forwarding_tables(
    t: &Topology,
    p: &AddressPlan,
) -> Result<ForwardingTables, RoutingError> {
    if let Some(v) = validate_plan(p, t).first() {
        return Err(RoutingError::BadPlan(v.to_string()));
    }
    let tables = compute_tables(t);
    for s in t.servers() {
        for d in t.servers() {
            if s.id != d.id && tables.next_hop(&s.id, &d.id).is_none() {
                return Err(RoutingError::Unreachable {
                    src: s.id.clone(),
                    dst: d.id.clone(),
                });
            }
        }
    }
    Ok(tables)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Route {
    pub nodes: Vec<String>,
    pub links: Vec<String>,
}

impl Route {
    /// Nodes after the source that make forwarding decisions (switches and
    /// passive optics excluded). The destination is the last entry.
    pub fn forwarding_hops(&self, t: &Topology) -> Vec<String> {
        self.nodes
            .iter()
            .skip(1)
            .filter(|n| t.node(n).map(|x| x.kind().is_l3()).unwrap_or(false))
            .cloned()
            .collect()
    }

    pub fn len_km(&self, t: &Topology) -> f64 {
        self.links
            .iter()
            .filter_map(|l| t.link(l))
            .map(|l| l.length_km)
            .sum()
    }
}

/// Follows table entries from `src` to `dst`.
pub fn route(
    tables: &ForwardingTables,
    t: &Topology,
    src: &str,
    dst: &str,
) -> Result<Route, RoutingError> {
    let unreachable = || RoutingError::Unreachable {
        src: src.to_string(),
        dst: dst.to_string(),
    };
    if t.node(src).is_none() || t.node(dst).is_none() {
        return Err(unreachable());
    }
    let mut r = Route {
        nodes: vec![src.to_string()],
        links: Vec::new(),
    };
    let mut cur = src;
    while cur != dst {
        let (next, link) = tables.next_hop(cur, dst).ok_or_else(unreachable)?;
        if r.nodes.iter().any(|n| n == next) || r.nodes.len() > t.node_count() {
            return Err(unreachable());
        }
        r.nodes.push(next.to_string());
        r.links.push(link.to_string());
        cur = next;
    }
    Ok(r)
}

#[derive(Serialize)]
struct RouteRow<'a> {
    src: &'a str,
    dst: &'a str,
    hop_index: usize,
    node_id: &'a str,
    link_id: &'a str,
}

/// Route dump: src, dst, hop_index, node_id, link_id. Hop 0 is the source
/// with an empty link id.
pub fn write_routes_csv<W: io::Write>(routes: &[Route], w: W) -> Result<(), RoutingError> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let err = |e: csv::Error| RoutingError::Csv(e.to_string());
    for r in routes {
        let (src, dst) = (&r.nodes[0], r.nodes.last().unwrap());
        for (i, n) in r.nodes.iter().enumerate() {
            let link = if i == 0 { "" } else { r.links[i - 1].as_str() };
            wr.serialize(RouteRow {
                src,
                dst,
                hop_index: i,
                node_id: n,
                link_id: link,
            })
            .map_err(err)?;
        }
    }
    wr.flush().map_err(|e| RoutingError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addressing::derive_address_plan;
    use crate::topo::builders::{build_cell, TestbedOptions};
    use crate::topo::{build_reference_testbed, NodeKind};

    #[test]
    fn reference_end_to_end_has_eight_forwarding_nodes() {
        let s = build_reference_testbed();
        let p = derive_address_plan(&s.topology).unwrap();
        let tables = compute_forwarding_tables(&s.topology, &p).unwrap();
        let r = route(&tables, &s.topology, "A1-S1", "B3-S3").unwrap();
        assert_eq!(
            r.forwarding_hops(&s.topology),
            ["CORE1", "CORE2", "CORE3", "OLT1", "ONU1", "B1-S1", "B3-S1", "B3-S3"]
        );
        assert_eq!(r.links.len(), r.nodes.len() - 1);
    }

    #[test]
    fn identity_route() {
        let t = build_cell("R", &TestbedOptions::default()).unwrap();
        let tables = compute_tables(&t);
        let r = route(&tables, &t, "R1-S2", "R1-S2").unwrap();
        assert_eq!(r.nodes, ["R1-S2"]);
        assert!(r.links.is_empty());
    }

    #[test]
    fn intra_rack_goes_through_switch() {
        let t = build_cell("R", &TestbedOptions::default()).unwrap();
        let r = route(&compute_tables(&t), &t, "R1-S2", "R1-S3").unwrap();
        assert_eq!(r.nodes, ["R1-S2", "R1-SW", "R1-S3"]);
    }

    #[test]
    fn inter_rack_relays_through_both_gateways() {
        let t = build_cell("R", &TestbedOptions::default()).unwrap();
        let r = route(&compute_tables(&t), &t, "R1-S2", "R2-S3").unwrap();
        assert_eq!(r.nodes, ["R1-S2", "R1-SW", "R1-S1", "R2-S1", "R2-SW", "R2-S3"]);
    }

    #[test]
    fn servers_never_relay() {
        let s = build_reference_testbed();
        let tables = compute_tables(&s.topology);
        let ids: Vec<_> = s.topology.nodes().map(|n| n.id.clone()).collect();
        for a in &ids {
            for b in &ids {
                let r = route(&tables, &s.topology, a, b).unwrap();
                for mid in r.nodes.iter().skip(1).take(r.nodes.len().saturating_sub(2)) {
                    let k = s.topology.node(mid).unwrap().kind();
                    assert!(k != NodeKind::Server && k != NodeKind::Camera, "{a}->{b} via {mid}");
                }
            }
        }
    }

    #[test]
    fn tie_break_is_deterministic() {
        let s = build_reference_testbed();
        assert_eq!(compute_tables(&s.topology), compute_tables(&s.topology));
    }

    #[test]
    fn missing_entry_is_unreachable() {
        let t = build_cell("R", &TestbedOptions::default()).unwrap();
        let mut tables = compute_tables(&t);
        assert!(tables.remove_entry("R1-S1", "R2-S3"));
        assert!(matches!(
            route(&tables, &t, "R1-S2", "R2-S3"),
            Err(RoutingError::Unreachable { .. })
        ));
    }

    #[test]
    fn route_csv_layout() {
        let t = build_cell("R", &TestbedOptions::default()).unwrap();
        let r = route(&compute_tables(&t), &t, "R1-S2", "R1-S3").unwrap();
        let mut buf = Vec::new();
        write_routes_csv(&[r], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "src,dst,hop_index,node_id,link_id\n\
             R1-S2,R1-S3,0,R1-S2,\n\
             R1-S2,R1-S3,1,R1-SW,R1-SW~R1-S2\n\
             R1-S2,R1-S3,2,R1-S3,R1-SW~R1-S3\n"
        );
    }
}
