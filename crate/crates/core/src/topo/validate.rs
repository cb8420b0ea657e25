use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use super::{NodeKind, Topology};

/// One violated topology invariant, naming the offending entity.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateId { id: String },
    MissingRack { node: String },
    MissingCell { node: String },
    UnexpectedAttachment { node: String },
    NegativeDelay { node: String, value: f64 },
    ZeroWavelengths { node: String },
    DanglingLink { link: String, node: String },
    SelfLoop { link: String },
    BadLength { link: String, value: f64 },
    BadRate { link: String, value: f64 },
    AsymmetricAdjacency { node: String, link: String },
    Connectivity { unreachable: String, count: usize },
    SwitchCount { rack: String, count: usize },
    MissingGateway { rack: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateId { id } => write!(f, "DuplicateId: `{id}` defined more than once"),
            MissingRack { node } => write!(f, "MissingRack: node {node} has no rack id"),
            MissingCell { node } => write!(f, "MissingCell: node {node} has no cell id"),
            UnexpectedAttachment { node } => {
                write!(f, "UnexpectedAttachment: core node {node} must have no rack or cell")
            }
            NegativeDelay { node, value } => {
                write!(f, "NegativeDelay: node {node} processing delay {value} us")
            }
            ZeroWavelengths { node } => write!(f, "ZeroWavelengths: node {node}"),
            DanglingLink { link, node } => {
                write!(f, "DanglingLink: link {link} references missing node {node}")
            }
            SelfLoop { link } => write!(f, "SelfLoop: link {link} has identical endpoints"),
            BadLength { link, value } => write!(f, "BadLength: link {link} length {value} km"),
            BadRate { link, value } => write!(f, "BadRate: link {link} rate {value} Gbps"),
            AsymmetricAdjacency { node, link } => {
                write!(f, "AsymmetricAdjacency: node {node} / link {link}")
            }
            Connectivity { unreachable, count } => write!(
                f,
                "Connectivity: {count} node(s) unreachable, first is {unreachable}"
            ),
            SwitchCount { rack, count } => {
                write!(f, "SwitchCount: rack {rack} has {count} switches (expected 1)")
            }
            MissingGateway { rack } => write!(f, "MissingGateway: rack {rack} has no gateway server"),
        }
    }
}

/// Every violated invariant of `t`; empty iff `t` is valid.
pub fn validate_topology(t: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();

    for node in t.nodes() {
        let kind = node.kind();
        let id = || node.id.clone();
        match kind {
            NodeKind::Server
            | NodeKind::GatewayServer
            | NodeKind::RackSwitch
            | NodeKind::OpticalBackplane => {
                if node.rack_id.is_none() {
                    out.push(Violation::MissingRack { node: id() });
                }
            }
            NodeKind::Coupler | NodeKind::Awgr | NodeKind::Olt => {
                if node.cell_id.is_none() {
                    out.push(Violation::MissingCell { node: id() });
                }
            }
            NodeKind::CoreNode => {
                if node.rack_id.is_some() || node.cell_id.is_some() {
                    out.push(Violation::UnexpectedAttachment { node: id() });
                }
            }
            NodeKind::Onu | NodeKind::Camera => {}
        }
        if !(node.processing_delay_us >= 0.0 && node.processing_delay_us.is_finite()) {
            out.push(Violation::NegativeDelay {
                node: id(),
                value: node.processing_delay_us,
            });
        }
        if node.wavelengths == Some(0) {
            out.push(Violation::ZeroWavelengths { node: id() });
        }
    }

    for link in t.links() {
        for end in [&link.a, &link.b] {
            if t.node(end).is_none() {
                out.push(Violation::DanglingLink {
                    link: link.id.clone(),
                    node: end.clone(),
                });
            }
        }
        if link.a == link.b {
            out.push(Violation::SelfLoop {
                link: link.id.clone(),
            });
        }
        if !(link.length_km >= 0.0 && link.length_km.is_finite()) {
            out.push(Violation::BadLength {
                link: link.id.clone(),
                value: link.length_km,
            });
        }
        if !(link.rate_gbps > 0.0 && link.rate_gbps.is_finite()) {
            out.push(Violation::BadRate {
                link: link.id.clone(),
                value: link.rate_gbps,
            });
        }
        for end in [&link.a, &link.b] {
            if let Some(adj) = t.adjacency(end) {
                if !adj.contains(&link.id) {
                    out.push(Violation::AsymmetricAdjacency {
                        node: end.clone(),
                        link: link.id.clone(),
                    });
                }
            }
        }
    }
    for node in t.nodes() {
        for lid in t.adjacency(&node.id).into_iter().flatten() {
            let ok = t
                .link(lid)
                .map(|l| l.a == node.id || l.b == node.id)
                .unwrap_or(false);
            if !ok {
                out.push(Violation::AsymmetricAdjacency {
                    node: node.id.clone(),
                    link: lid.clone(),
                });
            }
        }
    }

    if let Some(v) = connectivity(t) {
        out.push(v);
    }

    let mut switches: BTreeMap<&str, usize> = BTreeMap::new();
    let mut gateways: BTreeMap<&str, usize> = BTreeMap::new();
    for rack in t.racks() {
        switches.insert(rack, 0);
        gateways.insert(rack, 0);
    }
    for node in t.nodes() {
        let Some(rack) = node.rack_id.as_deref() else {
            continue;
        };
        if node.kind().is_rack_switch() {
            *switches.get_mut(rack).unwrap() += 1;
        }
        if node.kind() == NodeKind::GatewayServer {
            *gateways.get_mut(rack).unwrap() += 1;
        }
    }
    for (rack, count) in switches {
        if count != 1 {
            out.push(Violation::SwitchCount {
                rack: rack.to_string(),
                count,
            });
        }
    }
    for (rack, count) in gateways {
        if count == 0 {
            out.push(Violation::MissingGateway {
                rack: rack.to_string(),
            });
        }
    }

    out
}

fn connectivity(t: &Topology) -> Option<Violation> {
    let start = t.nodes().next()?;
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut queue = VecDeque::from([start.id.as_str()]);
    seen.insert(&start.id);
    while let Some(cur) = queue.pop_front() {
        for (_, next) in t.neighbours(cur) {
            if t.node(next).is_some() && seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    let missing: Vec<&str> = t
        .nodes()
        .map(|n| n.id.as_str())
        .filter(|id| !seen.contains(id))
        .collect();
    missing.first().map(|first| Violation::Connectivity {
        unreachable: first.to_string(),
        count: missing.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{build_rack, InterconnectMode, Link, Medium, Node};

    #[test]
    fn two_disconnected_racks_one_connectivity_violation() {
        let mut t = Topology::new(InterconnectMode::Tdm);
        t.merge(build_rack("R1", 3, 1, 10.0).unwrap()).unwrap();
        t.merge(build_rack("R2", 3, 1, 10.0).unwrap()).unwrap();
        let v = validate_topology(&t);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::Connectivity { count: 4, .. }));
    }

    #[test]
    fn rack_without_gateway() {
        let mut t = Topology::default();
        t.add_node(Node::new("R1-SW", NodeKind::RackSwitch).in_rack("R1"))
            .unwrap();
        t.add_node(Node::new("R1-S1", NodeKind::Server).in_rack("R1"))
            .unwrap();
        t.add_link(Link::between("R1-SW", "R1-S1", 0.0, 10.0, Medium::Copper))
            .unwrap();
        assert_eq!(
            validate_topology(&t),
            vec![Violation::MissingGateway { rack: "R1".into() }]
        );
    }

    #[test]
    fn dangling_link_names_missing_id() {
        let mut t = build_rack("R1", 2, 1, 10.0).unwrap();
        t.add_link(Link::between("R1-S1", "ghost", 1.0, 10.0, Medium::Fibre))
            .unwrap();
        let v = validate_topology(&t);
        assert!(v.contains(&Violation::DanglingLink {
            link: "R1-S1~ghost".into(),
            node: "ghost".into()
        }));
    }

    #[test]
    fn attribute_invariants() {
        let mut t = Topology::default();
        t.add_node(Node::new("c", NodeKind::CoreNode).in_cell("X"))
            .unwrap();
        t.add_node(Node::new("o", NodeKind::Olt).with_delay(-1.0))
            .unwrap();
        t.add_link(Link::between("c", "o", -2.0, 0.0, Medium::Fibre))
            .unwrap();
        let v = validate_topology(&t);
        assert!(v.contains(&Violation::UnexpectedAttachment { node: "c".into() }));
        assert!(v.contains(&Violation::MissingCell { node: "o".into() }));
        assert!(v.iter().any(|x| matches!(x, Violation::NegativeDelay { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::BadLength { .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::BadRate { .. })));
    }
}
