use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::Serialize;

use super::{route, ForwardingTables, RoutingError};
use crate::topo::{InterconnectMode, NodeKind, Topology, DEFAULT_WAVELENGTHS};

/// Cyclic AWGR routing: wavelength `w` entering port `input` leaves on
/// `(input + w) mod n_ports`.
pub fn awgr_output_port(input_port: usize, wavelength: usize, n_ports: usize) -> Result<usize, RoutingError> {
    if n_ports == 0 || input_port >= n_ports {
        return Err(RoutingError::InvalidArgument(format!(
            "input port {input_port} out of range for {n_ports}-port AWGR"
        )));
    }
    Ok((input_port + wavelength % n_ports) % n_ports)
}

/// Port numbering of one AWGR. Head-side ports face the OLT/core, tail-side
/// ports face the ONUs; each side is numbered by neighbour id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AwgrPorts {
    pub head: Vec<String>,
    pub tail: Vec<String>,
    pub n_ports: usize,
    pub wavelengths: u32,
}

impl AwgrPorts {
    fn head_port(&self, node: &str) -> Option<usize> {
        self.head.iter().position(|n| n == node)
    }

    fn tail_port(&self, node: &str) -> Option<usize> {
        self.tail.iter().position(|n| n == node)
    }
}

pub fn awgr_ports(t: &Topology, awgr: &str) -> Option<AwgrPorts> {
    let node = t.node(awgr)?;
    if node.kind() != NodeKind::Awgr {
        return None;
    }
    let mut head = BTreeSet::new();
    let mut tail = BTreeSet::new();
    for (_, other) in t.neighbours(awgr) {
        match t.node(other).map(|n| n.kind()) {
            Some(NodeKind::Olt) | Some(NodeKind::CoreNode) => head.insert(other.to_string()),
            _ => tail.insert(other.to_string()),
        };
    }
    let n_ports = head.len().max(tail.len()).max(1);
    Some(AwgrPorts {
        head: head.into_iter().collect(),
        tail: tail.into_iter().collect(),
        n_ports,
        wavelengths: node.wavelengths.unwrap_or(DEFAULT_WAVELENGTHS),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Side {
    Head,
    Tail,
}

/// One traversal of an AWGR by a flow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crossing {
    pub flow: usize,
    pub awgr: String,
    pub entry_side: Side,
    pub head_port: usize,
    pub tail_port: usize,
    pub n_ports: usize,
}

impl Crossing {
    pub fn entry_port(&self) -> usize {
        match self.entry_side {
            Side::Head => self.head_port,
            Side::Tail => self.tail_port,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WavelengthAssignment {
    /// Flow index -> wavelength, for flows that cross at least one AWGR.
    pub wavelengths: BTreeMap<usize, u32>,
    pub crossings: Vec<Crossing>,
    pub flows: Vec<(String, String)>,
}

/// First-fit, lowest-index wavelength per flow, in flow order. A wavelength
/// is usable for a flow if on every AWGR it crosses it routes the flow's
/// head port to its tail port and is not already lit on the flow's entry
/// port.
pub fn assign_wavelengths(
    t: &Topology,
    tables: &ForwardingTables,
    flows: &[(String, String)],
) -> Result<WavelengthAssignment, RoutingError> {
    if t.interconnect_mode != InterconnectMode::Awgr {
        return Err(RoutingError::InvalidArgument(
            "wavelength assignment needs interconnect_mode = Awgr".into(),
        ));
    }
    let mut ports: BTreeMap<String, AwgrPorts> = BTreeMap::new();
    let mut lit: BTreeMap<(String, Side, usize), BTreeSet<u32>> = BTreeMap::new();
    let mut out = WavelengthAssignment {
        flows: flows.to_vec(),
        ..Default::default()
    };

    for (flow, (src, dst)) in flows.iter().enumerate() {
        let r = route(tables, t, src, dst)?;
        let mut crossings = Vec::new();
        for j in 1..r.nodes.len().saturating_sub(1) {
            let id = &r.nodes[j];
            if t.node(id).map(|n| n.kind()) != Some(NodeKind::Awgr) {
                continue;
            }
            let p = ports
                .entry(id.clone())
                .or_insert_with(|| awgr_ports(t, id).expect("awgr node"));
            let (prev, next) = (&r.nodes[j - 1], &r.nodes[j + 1]);
            let crossing = match (p.head_port(prev), p.tail_port(next), p.tail_port(prev), p.head_port(next)) {
                (Some(h), Some(tl), _, _) => (Side::Head, h, tl),
                (_, _, Some(tl), Some(h)) => (Side::Tail, h, tl),
                _ => {
                    return Err(RoutingError::InvalidArgument(format!(
                        "flow {flow} enters and leaves {id} on the same side"
                    )))
                }
            };
            crossings.push((
                Crossing {
                    flow,
                    awgr: id.clone(),
                    entry_side: crossing.0,
                    head_port: crossing.1,
                    tail_port: crossing.2,
                    n_ports: p.n_ports,
                },
                p.wavelengths,
            ));
        }
        if crossings.is_empty() {
            continue;
        }
        let limit = crossings.iter().map(|(_, w)| *w).min().unwrap();
        let usable = |w: u32| {
            crossings.iter().all(|(c, _)| {
                let routes = awgr_output_port(c.head_port, w as usize, c.n_ports)
                    .map(|o| o == c.tail_port)
                    .unwrap_or(false);
                let free = lit
                    .get(&(c.awgr.clone(), c.entry_side, c.entry_port()))
                    .map(|s| !s.contains(&w))
                    .unwrap_or(true);
                routes && free
            })
        };
        let Some(w) = (0..limit).find(|w| usable(*w)) else {
            let c = &crossings[0].0;
            return Err(RoutingError::Exhausted {
                awgr: c.awgr.clone(),
                port: c.entry_port(),
                flow,
            });
        };
        for (c, _) in crossings {
            lit.entry((c.awgr.clone(), c.entry_side, c.entry_port()))
                .or_default()
                .insert(w);
            out.crossings.push(c);
        }
        out.wavelengths.insert(flow, w);
    }
    Ok(out)
}

#[derive(Serialize)]
struct WavelengthRow<'a> {
    flow_id: usize,
    src: &'a str,
    dst: &'a str,
    wavelength: u32,
}

/// Wavelength dump: flow_id, src, dst, wavelength.
pub fn write_wavelength_csv<W: io::Write>(a: &WavelengthAssignment, w: W) -> Result<(), RoutingError> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    for (flow, wl) in &a.wavelengths {
        let (src, dst) = &a.flows[*flow];
        wr.serialize(WavelengthRow {
            flow_id: *flow,
            src,
            dst,
            wavelength: *wl,
        })
        .map_err(|e| RoutingError::Csv(e.to_string()))?;
    }
    wr.flush().map_err(|e| RoutingError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_hand_values() {
        assert_eq!(awgr_output_port(0, 0, 4).unwrap(), 0);
        assert_eq!(awgr_output_port(1, 2, 4).unwrap(), 3);
        assert_eq!(awgr_output_port(3, 2, 4).unwrap(), 1);
        assert!(awgr_output_port(4, 0, 4).is_err());
        assert!(awgr_output_port(0, 0, 0).is_err());
    }

    // hand-written 4x4 cyclic table, row = input, column = wavelength
    #[test]
    fn four_port_table() {
        let table = [[0, 1, 2, 3], [1, 2, 3, 0], [2, 3, 0, 1], [3, 0, 1, 2]];
        for (i, row) in table.iter().enumerate() {
            for (w, out) in row.iter().enumerate() {
                assert_eq!(awgr_output_port(i, w, 4).unwrap(), *out);
                assert_eq!(awgr_output_port(i, w + 4, 4).unwrap(), *out);
            }
        }
    }
}
