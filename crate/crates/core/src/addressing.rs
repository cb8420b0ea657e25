//! IPv4 plan for racks, relay gateways and the optical infrastructure.
//!
//! Rack `k` (racks in ascending id order, from 1) owns `10.0.k.0/24`; its
//! hosts are numbered from `.1` in ascending node-id order. Gateways that
//! have links leaving their rack are dual-homed onto the transit network
//! `10.0.0.0/24`, numbered in rack order. Core nodes, OLTs and ONUs are
//! numbered in `10.1.0.0/16`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topo::{NodeKind, Topology};

pub const MAX_RACK_HOSTS: usize = 253;

#[derive(Debug, Error, PartialEq)]
pub enum AddressError {
    #[error("rack {rack} has {hosts} hosts, more than {MAX_RACK_HOSTS}")]
    Capacity { rack: String, hosts: usize },
    #[error("too many racks ({0}) for the 10.0.k.0/24 scheme")]
    TooManyRacks(usize),
    #[error("address {0} is not assigned")]
    UnknownAddress(Ipv4Addr),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("bad subnet `{0}`")]
    BadSubnet(String),
    #[error("plan csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subnet {
    base: Ipv4Addr,
    prefix_len: u8,
}

impl Subnet {
    /// Fails if `prefix_len > 32`. Host bits are not checked here; see
    /// [`Subnet::has_host_bits`].
    pub fn new(base: Ipv4Addr, prefix_len: u8) -> Result<Self, AddressError> {
        if prefix_len > 32 {
            return Err(AddressError::BadSubnet(format!("{base}/{prefix_len}")));
        }
        Ok(Subnet { base, prefix_len })
    }

    pub fn base(&self) -> Ipv4Addr {
        self.base
    }

    pub fn prefix_len(&self) -> u8 {
        self.prefix_len
    }

    fn mask(&self) -> u32 {
        if self.prefix_len == 0 {
            0
        } else {
            u32::MAX << (32 - self.prefix_len)
        }
    }

    pub fn has_host_bits(&self) -> bool {
        u32::from(self.base) & !self.mask() != 0
    }

    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        u32::from(addr) & self.mask() == u32::from(self.base) & self.mask()
    }

    pub fn overlaps(&self, other: &Subnet) -> bool {
        let m = self.mask() & other.mask();
        u32::from(self.base) & m == u32::from(other.base) & m
    }

    fn host(&self, n: u32) -> Ipv4Addr {
        Ipv4Addr::from((u32::from(self.base) & self.mask()) + n)
    }
}

impl fmt::Display for Subnet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.prefix_len)
    }
}

impl FromStr for Subnet {
    type Err = AddressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AddressError::BadSubnet(s.to_string());
        let (a, p) = s.split_once('/').ok_or_else(bad)?;
        let base: Ipv4Addr = a.parse().map_err(|_| bad())?;
        let prefix: u8 = p.parse().map_err(|_| bad())?;
        Subnet::new(base, prefix)
    }
}

pub fn transit_subnet() -> Subnet {
    Subnet::new(Ipv4Addr::new(10, 0, 0, 0), 24).unwrap()
}

pub fn infrastructure_subnet() -> Subnet {
    Subnet::new(Ipv4Addr::new(10, 1, 0, 0), 16).unwrap()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AddressPlan {
    pub rack_subnets: BTreeMap<String, Subnet>,
    pub interface_addresses: BTreeMap<(String, Subnet), Ipv4Addr>,
    pub default_gateways: BTreeMap<String, Ipv4Addr>,
}

impl AddressPlan {
    pub fn addresses_of<'a>(&'a self, node: &'a str) -> impl Iterator<Item = (Subnet, Ipv4Addr)> + 'a {
        self.interface_addresses
            .iter()
            .filter(move |((n, _), _)| n == node)
            .map(|((_, s), a)| (*s, *a))
    }

    /// Node owning `addr`, if any.
    pub fn owner(&self, addr: Ipv4Addr) -> Option<&str> {
        self.interface_addresses
            .iter()
            .find(|(_, a)| **a == addr)
            .map(|((n, _), _)| n.as_str())
    }

    /// Address of `node` inside its rack subnet.
    pub fn rack_address(&self, t: &Topology, node: &str) -> Option<Ipv4Addr> {
        let rack = t.node(node)?.rack_id.as_deref()?;
        let subnet = self.rack_subnets.get(rack)?;
        self.interface_addresses
            .get(&(node.to_string(), *subnet))
            .copied()
    }
}

fn has_external_links(t: &Topology, node: &str) -> bool {
    let rack = t.node(node).and_then(|n| n.rack_id.as_deref());
    t.neighbours(node)
        .any(|(_, other)| t.node(other).and_then(|n| n.rack_id.as_deref()) != rack)
}

fn is_rack_host(kind: NodeKind) -> bool {
    matches!(kind, NodeKind::Server | NodeKind::GatewayServer | NodeKind::Camera)
}

/// Deterministic address plan for `t`.
pub fn derive_address_plan(t: &Topology) -> Result<AddressPlan, AddressError> {
    let mut plan = AddressPlan::default();
    let racks = t.racks();
    if racks.len() > 255 {
        return Err(AddressError::TooManyRacks(racks.len()));
    }
    let transit = transit_subnet();
    let mut transit_next = 1u32;
    for (k, rack) in racks.iter().enumerate() {
        let subnet = Subnet::new(Ipv4Addr::new(10, 0, k as u8 + 1, 0), 24).unwrap();
        plan.rack_subnets.insert(rack.to_string(), subnet);
        let hosts: Vec<_> = t
            .rack_members(rack)
            .filter(|n| is_rack_host(n.kind()))
            .collect();
        if hosts.len() > MAX_RACK_HOSTS {
            return Err(AddressError::Capacity {
                rack: rack.to_string(),
                hosts: hosts.len(),
            });
        }
        for (i, h) in hosts.iter().enumerate() {
            plan.interface_addresses
                .insert((h.id.clone(), subnet), subnet.host(i as u32 + 1));
        }
        let gateway = hosts
            .iter()
            .find(|n| n.kind() == NodeKind::GatewayServer)
            .and_then(|g| plan.interface_addresses.get(&(g.id.clone(), subnet)).copied());
        for h in &hosts {
            if let Some(gw) = gateway {
                plan.default_gateways.insert(h.id.clone(), gw);
            }
            if h.kind() == NodeKind::GatewayServer && has_external_links(t, &h.id) {
                plan.interface_addresses
                    .insert((h.id.clone(), transit), transit.host(transit_next));
                transit_next += 1;
            }
        }
    }
    // gateways were given themselves as default above only if they are the
    // rack's first gateway; every gateway routes for itself
    for n in t.nodes().filter(|n| n.kind() == NodeKind::GatewayServer) {
        if let Some(own) = plan.rack_address(t, &n.id) {
            plan.default_gateways.insert(n.id.clone(), own);
        }
    }
    let infra = infrastructure_subnet();
    let infra_nodes = t
        .nodes()
        .filter(|n| matches!(n.kind(), NodeKind::CoreNode | NodeKind::Olt | NodeKind::Onu));
    for (i, n) in infra_nodes.enumerate() {
        plan.interface_addresses
            .insert((n.id.clone(), infra), infra.host(i as u32 + 1));
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanViolation {
    DuplicateAddress { address: Ipv4Addr, nodes: Vec<String> },
    Overlap { a: String, b: String },
    HostBits { subnet: Subnet },
    OutsideSubnet { node: String, address: Ipv4Addr, subnet: Subnet },
    AddressCount { node: String, expected: usize, found: usize },
    MissingDefaultGateway { node: String },
    UnreachableGateway { node: String, gateway: Ipv4Addr },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use PlanViolation::*;
        match self {
            DuplicateAddress { address, nodes } => {
                write!(f, "DuplicateAddress: {address} held by {}", nodes.join(","))
            }
            Overlap { a, b } => write!(f, "Overlap: subnets of {a} and {b} overlap"),
            HostBits { subnet } => write!(f, "HostBits: {subnet} has host bits set"),
            OutsideSubnet { node, address, subnet } => {
                write!(f, "OutsideSubnet: {node} address {address} not in {subnet}")
            }
            AddressCount { node, expected, found } => {
                write!(f, "AddressCount: {node} has {found} addresses, expected {expected}")
            }
            MissingDefaultGateway { node } => write!(f, "MissingDefaultGateway: {node}"),
            UnreachableGateway { node, gateway } => {
                write!(f, "UnreachableGateway: {node} cannot reach default gateway {gateway}")
            }
        }
    }
}

/// Every violation of the plan invariants against topology `t`.
pub fn validate_plan(p: &AddressPlan, t: &Topology) -> Vec<PlanViolation> {
    let mut out = Vec::new();

    let mut by_addr: BTreeMap<Ipv4Addr, BTreeSet<&str>> = BTreeMap::new();
    for ((node, _), addr) in &p.interface_addresses {
        by_addr.entry(*addr).or_default().insert(node);
    }
    let mut per_node_addr: BTreeMap<(&str, Ipv4Addr), usize> = BTreeMap::new();
    for ((node, _), addr) in &p.interface_addresses {
        *per_node_addr.entry((node, *addr)).or_default() += 1;
    }
    for (addr, nodes) in by_addr {
        let repeated = nodes.len() > 1 || nodes.iter().any(|n| per_node_addr[&(*n, addr)] > 1);
        if repeated {
            out.push(PlanViolation::DuplicateAddress {
                address: addr,
                nodes: nodes.into_iter().map(String::from).collect(),
            });
        }
    }

    // labelled subnets: racks, then transit/infrastructure if in use
    let mut labelled: Vec<(String, Subnet)> = p
        .rack_subnets
        .iter()
        .map(|(r, s)| (format!("rack {r}"), *s))
        .collect();
    let used: BTreeSet<Subnet> = p.interface_addresses.keys().map(|(_, s)| *s).collect();
    for s in used {
        if !p.rack_subnets.values().any(|r| *r == s) {
            labelled.push((format!("network {s}"), s));
        }
    }
    for s in labelled.iter().map(|(_, s)| s).collect::<BTreeSet<_>>() {
        if s.has_host_bits() {
            out.push(PlanViolation::HostBits { subnet: *s });
        }
    }
    for (i, (la, sa)) in labelled.iter().enumerate() {
        for (lb, sb) in &labelled[i + 1..] {
            if sa.overlaps(sb) {
                out.push(PlanViolation::Overlap {
                    a: la.clone(),
                    b: lb.clone(),
                });
            }
        }
    }

    for ((node, subnet), addr) in &p.interface_addresses {
        if !subnet.contains(*addr) {
            out.push(PlanViolation::OutsideSubnet {
                node: node.clone(),
                address: *addr,
                subnet: *subnet,
            });
        }
    }

    for n in t.nodes().filter(|n| n.kind().is_l3()) {
        let found = p.addresses_of(&n.id).count();
        let expected = match n.kind() {
            NodeKind::GatewayServer if has_external_links(t, &n.id) => 2,
            _ => 1,
        };
        let distinct: BTreeSet<Subnet> = p.addresses_of(&n.id).map(|(s, _)| s).collect();
        if found != expected || distinct.len() != found {
            out.push(PlanViolation::AddressCount {
                node: n.id.clone(),
                expected,
                found,
            });
        }
        if !is_rack_host(n.kind()) || n.rack_id.is_none() {
            continue;
        }
        let Some(gw) = p.default_gateways.get(&n.id) else {
            out.push(PlanViolation::MissingDefaultGateway { node: n.id.clone() });
            continue;
        };
        let reachable = p.addresses_of(&n.id).any(|(s, _)| s.contains(*gw))
            && p
                .owner(*gw)
                .and_then(|o| t.node(o))
                .map(|g| g.kind() == NodeKind::GatewayServer && g.rack_id == n.rack_id)
                .unwrap_or(false);
        if !reachable {
            out.push(PlanViolation::UnreachableGateway {
                node: n.id.clone(),
                gateway: *gw,
            });
        }
    }
    out
}

/// Next node at the addressing layer for traffic from `src` to `dst_addr`:
/// on-link destinations are reached directly, hosts hand everything else to
/// their default gateway, and gateways relay to the destination rack's
/// gateway over the transit network.
pub fn resolve_next_hop(
    p: &AddressPlan,
    t: &Topology,
    src: &str,
    dst_addr: Ipv4Addr,
) -> Result<String, AddressError> {
    let src_node = t
        .node(src)
        .ok_or_else(|| AddressError::UnknownNode(src.to_string()))?;
    let dst = p
        .owner(dst_addr)
        .ok_or(AddressError::UnknownAddress(dst_addr))?;
    if dst == src || p.addresses_of(src).any(|(s, _)| s.contains(dst_addr)) {
        return Ok(dst.to_string());
    }
    if src_node.kind() == NodeKind::Server || src_node.kind() == NodeKind::Camera {
        let gw = p
            .default_gateways
            .get(src)
            .ok_or_else(|| AddressError::UnknownNode(src.to_string()))?;
        return p
            .owner(*gw)
            .map(String::from)
            .ok_or(AddressError::UnknownAddress(*gw));
    }
    // a relay: deliver to the gateway of the destination's rack, or straight
    // to infrastructure nodes reached over the transit/core networks
    let dst_rack = t.node(dst).and_then(|n| n.rack_id.clone());
    match dst_rack {
        Some(rack) => {
            let gw = t
                .rack_members(&rack)
                .find(|n| n.kind() == NodeKind::GatewayServer)
                .ok_or_else(|| AddressError::UnknownNode(format!("gateway of {rack}")))?;
            Ok(gw.id.clone())
        }
        None => Ok(dst.to_string()),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PlanRow {
    node_id: String,
    subnet: String,
    address: String,
    role: String,
    default_gateway: String,
}

/// Writes the plan as CSV: node_id, subnet, address, role, default_gateway.
/// The default gateway is listed on the rack-facing interface only.
pub fn write_plan_csv<W: io::Write>(p: &AddressPlan, t: &Topology, w: W) -> Result<(), AddressError> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let csv_err = |e: csv::Error| AddressError::Csv(e.to_string());
    for ((node, subnet), addr) in &p.interface_addresses {
        let kind = t.node(node).map(|n| n.kind());
        let role = match kind {
            Some(NodeKind::Server) | Some(NodeKind::Camera) => "host",
            _ => "gateway",
        };
        let rack_facing = t
            .node(node)
            .and_then(|n| n.rack_id.as_ref())
            .and_then(|r| p.rack_subnets.get(r))
            == Some(subnet);
        let gw = match (rack_facing, p.default_gateways.get(node)) {
            (true, Some(g)) => g.to_string(),
            _ => String::new(),
        };
        wr.serialize(PlanRow {
            node_id: node.clone(),
            subnet: subnet.to_string(),
            address: addr.to_string(),
            role: role.into(),
            default_gateway: gw,
        })
        .map_err(csv_err)?;
    }
    wr.flush().map_err(|e| AddressError::Csv(e.to_string()))?;
    Ok(())
}

/// Reads a plan written by [`write_plan_csv`]. A rack's subnet is the subnet
/// of its members' rack-facing interfaces (rows with a default gateway).
pub fn read_plan_csv<R: io::Read>(t: &Topology, r: R) -> Result<AddressPlan, AddressError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut plan = AddressPlan::default();
    for row in rd.deserialize::<PlanRow>() {
        let row = row.map_err(|e| AddressError::Csv(e.to_string()))?;
        let subnet: Subnet = row.subnet.parse()?;
        let addr: Ipv4Addr = row
            .address
            .parse()
            .map_err(|_| AddressError::Csv(format!("bad address `{}`", row.address)))?;
        plan.interface_addresses
            .insert((row.node_id.clone(), subnet), addr);
        if !row.default_gateway.is_empty() {
            let gw: Ipv4Addr = row.default_gateway.parse().map_err(|_| {
                AddressError::Csv(format!("bad gateway `{}`", row.default_gateway))
            })?;
            plan.default_gateways.insert(row.node_id.clone(), gw);
            if let Some(rack) = t.node(&row.node_id).and_then(|n| n.rack_id.clone()) {
                plan.rack_subnets.entry(rack).or_insert(subnet);
            }
        }
    }
    Ok(plan)
}
