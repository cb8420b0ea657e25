//! Node/link model of the data-centre testbed.
//!
//! A [`Topology`] is a typed, undirected multigraph. Nodes carry the role they
//! play (server, gateway, rack switch, PON element, core node); links carry
//! length, rate and medium. Builders for the two reference testbeds live in
//! [`builders`], JSON scenario I/O in [`scenario`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod builders;
pub mod scenario;
mod validate;

pub use builders::{
    build_prior_testbed, build_rack, build_reference_testbed, build_testbed, TestbedOptions,
    TestbedShape,
};
pub use scenario::{load_scenario, parse_scenario, save_scenario, ScenarioConfig, ScenarioError};
pub use validate::{validate_topology, Violation};

/// Wavelengths available on a C-band DWDM mux/AWGR unless a node says otherwise.
pub const DEFAULT_WAVELENGTHS: u32 = 80;

#[derive(Debug, Error, PartialEq)]
pub enum TopoError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Server,
    GatewayServer,
    RackSwitch,
    OpticalBackplane,
    Olt,
    Onu,
    Coupler,
    Awgr,
    CoreNode,
    Camera,
}

impl NodeKind {
    /// Nodes that own an IP stack: they make forwarding decisions, decrement
    /// TTL and answer probes. Switches and passive optics are transparent.
    pub fn is_l3(self) -> bool {
        !self.is_transparent()
    }

    pub fn is_transparent(self) -> bool {
        matches!(
            self,
            NodeKind::RackSwitch | NodeKind::OpticalBackplane | NodeKind::Coupler | NodeKind::Awgr
        )
    }

    /// Whether traffic between two other nodes may pass through this node.
    /// Plain servers and cameras are endpoints only; relaying is done by
    /// gateway servers.
    pub fn can_transit(self) -> bool {
        !matches!(self, NodeKind::Server | NodeKind::Camera)
    }

    pub fn is_server(self) -> bool {
        matches!(self, NodeKind::Server | NodeKind::GatewayServer)
    }

    pub fn is_rack_switch(self) -> bool {
        matches!(self, NodeKind::RackSwitch | NodeKind::OpticalBackplane)
    }

    /// Processing delay (µs, one way) used before calibration.
    pub fn default_processing_delay_us(self) -> f64 {
        match self {
            NodeKind::Server | NodeKind::Camera => 5.0,
            NodeKind::GatewayServer => 10.0,
            NodeKind::RackSwitch | NodeKind::OpticalBackplane => 1.0,
            NodeKind::Coupler | NodeKind::Awgr => 0.0,
            NodeKind::Olt | NodeKind::Onu | NodeKind::CoreNode => 20.0,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Medium {
    Copper,
    Fibre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum InterconnectMode {
    #[default]
    Tdm,
    Awgr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    kind: NodeKind,
    pub rack_id: Option<String>,
    pub cell_id: Option<String>,
    pub processing_delay_us: f64,
    /// DWDM channel count; only meaningful for core nodes and AWGRs.
    pub wavelengths: Option<u32>,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        let wavelengths = matches!(kind, NodeKind::CoreNode | NodeKind::Awgr)
            .then_some(DEFAULT_WAVELENGTHS);
        Node {
            id: id.into(),
            kind,
            rack_id: None,
            cell_id: None,
            processing_delay_us: kind.default_processing_delay_us(),
            wavelengths,
        }
    }

    pub fn in_rack(mut self, rack: impl Into<String>) -> Self {
        self.rack_id = Some(rack.into());
        self
    }

    pub fn in_cell(mut self, cell: impl Into<String>) -> Self {
        self.cell_id = Some(cell.into());
        self
    }

    pub fn with_delay(mut self, us: f64) -> Self {
        self.processing_delay_us = us;
        self
    }

    pub fn with_wavelengths(mut self, w: Option<u32>) -> Self {
        self.wavelengths = w;
        self
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub a: String,
    pub b: String,
    pub length_km: f64,
    pub rate_gbps: f64,
    pub medium: Medium,
}

impl Link {
    pub fn new(
        id: impl Into<String>,
        a: impl Into<String>,
        b: impl Into<String>,
        length_km: f64,
        rate_gbps: f64,
        medium: Medium,
    ) -> Self {
        Link {
            id: id.into(),
            a: a.into(),
            b: b.into(),
            length_km,
            rate_gbps,
            medium,
        }
    }

    /// Link between `a` and `b` with the conventional `a~b` id.
    pub fn between(a: &str, b: &str, length_km: f64, rate_gbps: f64, medium: Medium) -> Self {
        Link::new(format!("{a}~{b}"), a, b, length_km, rate_gbps, medium)
    }

    /// The endpoint opposite `node`, if `node` is an endpoint.
    pub fn other(&self, node: &str) -> Option<&str> {
        if self.a == node {
            Some(&self.b)
        } else if self.b == node {
            Some(&self.a)
        } else {
            None
        }
    }
}

/// Typed node/link graph. Ids are unique; adjacency is maintained on insert.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<String, Node>,
    links: BTreeMap<String, Link>,
    adjacency: BTreeMap<String, BTreeSet<String>>,
    pub interconnect_mode: InterconnectMode,
}

impl Topology {
    pub fn new(mode: InterconnectMode) -> Self {
        Topology {
            interconnect_mode: mode,
            ..Default::default()
        }
    }

    pub fn add_node(&mut self, node: Node) -> Result<(), TopoError> {
        if self.nodes.contains_key(&node.id) {
            return Err(TopoError::DuplicateNode(node.id));
        }
        let id = node.id.clone();
        // Links may have been added before their endpoints (scenario files).
        let pending: BTreeSet<String> = self
            .links
            .values()
            .filter(|l| l.a == id || l.b == id)
            .map(|l| l.id.clone())
            .collect();
        self.adjacency.insert(id.clone(), pending);
        self.nodes.insert(id, node);
        Ok(())
    }

    /// Inserts a link. Endpoints that do not exist are tolerated here and
    /// reported by [`validate_topology`].
    pub fn add_link(&mut self, link: Link) -> Result<(), TopoError> {
        if self.links.contains_key(&link.id) {
            return Err(TopoError::DuplicateLink(link.id));
        }
        for end in [&link.a, &link.b] {
            if let Some(adj) = self.adjacency.get_mut(end) {
                adj.insert(link.id.clone());
            }
        }
        self.links.insert(link.id.clone(), link);
        Ok(())
    }

    /// Moves every node and link of `other` into `self`.
    pub fn merge(&mut self, other: Topology) -> Result<(), TopoError> {
        for node in other.nodes.into_values() {
            self.add_node(node)?;
        }
        for link in other.links.into_values() {
            self.add_link(link)?;
        }
        Ok(())
    }

    pub fn remove_node(&mut self, id: &str) -> Option<Node> {
        let node = self.nodes.remove(id)?;
        let incident = self.adjacency.remove(id).unwrap_or_default();
        for lid in incident {
            if let Some(link) = self.links.remove(&lid) {
                if let Some(other) = link.other(id) {
                    if let Some(adj) = self.adjacency.get_mut(other) {
                        adj.remove(&lid);
                    }
                }
            }
        }
        Some(node)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Link ids incident to `id`.
    pub fn incident_links(&self, id: &str) -> impl Iterator<Item = &Link> {
        self.adjacency
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|lid| self.links.get(lid))
    }

    /// `(link, neighbour)` pairs of `id`, in link-id order.
    pub fn neighbours<'a>(&'a self, id: &'a str) -> impl Iterator<Item = (&'a Link, &'a str)> {
        self.incident_links(id)
            .filter_map(move |l| l.other(id).map(|o| (l, o)))
    }

    pub fn adjacency(&self, id: &str) -> Option<&BTreeSet<String>> {
        self.adjacency.get(id)
    }

    pub fn set_processing_delay(&mut self, id: &str, us: f64) -> Result<(), TopoError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| TopoError::UnknownNode(id.to_string()))?;
        node.processing_delay_us = us;
        Ok(())
    }

    /// Distinct rack ids in ascending order.
    pub fn racks(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .nodes
            .values()
            .filter_map(|n| n.rack_id.as_deref())
            .collect();
        set.into_iter().collect()
    }

    pub fn rack_members<'a>(&'a self, rack: &'a str) -> impl Iterator<Item = &'a Node> {
        self.nodes
            .values()
            .filter(move |n| n.rack_id.as_deref() == Some(rack))
    }

    /// Servers (including gateways) in ascending id order.
    pub fn servers(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind.is_server())
    }
}
