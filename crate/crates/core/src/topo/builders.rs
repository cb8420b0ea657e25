//! Programmatic construction of racks and of the two end-to-end testbeds.
//!
//! Node naming: racks are `<cell><n>` (`A1`, `B3`), the rack switch is
//! `<rack>-SW`, servers are `<rack>-S<i>` with the first `n_gateways` of them
//! acting as gateway/relay servers. Core nodes are `CORE<i>`, the PON segment
//! is `OLT1`, `PON1-SPLIT` (or `PON1-AWGR`) and `ONU1`.

use super::{InterconnectMode, Link, Medium, Node, NodeKind, ScenarioConfig, TopoError, Topology};
use crate::probes::{calibrate_processing_delays, CalibrationTargets, ProbeConfig};
use crate::simcore::{DelayConstants, JitterModel};

/// Star-wired rack: one switch, `n_servers` servers, the first `n_gateways`
/// of which are gateways. Intra-rack cables have zero length.
pub fn build_rack(
    rack_id: &str,
    n_servers: usize,
    n_gateways: usize,
    link_rate_gbps: f64,
) -> Result<Topology, TopoError> {
    rack_fragment(rack_id, None, n_servers, n_gateways, link_rate_gbps)
}

fn rack_fragment(
    rack_id: &str,
    cell: Option<&str>,
    n_servers: usize,
    n_gateways: usize,
    link_rate_gbps: f64,
) -> Result<Topology, TopoError> {
    if n_servers == 0 || n_gateways == 0 {
        return Err(TopoError::InvalidArgument(
            "a rack needs at least one server and one gateway".into(),
        ));
    }
    if n_gateways > n_servers {
        return Err(TopoError::InvalidArgument(format!(
            "{n_gateways} gateways requested for {n_servers} servers"
        )));
    }
    if !(link_rate_gbps > 0.0) {
        return Err(TopoError::InvalidArgument(format!(
            "link rate must be positive, got {link_rate_gbps}"
        )));
    }
    let attach = |n: Node| match cell {
        Some(c) => n.in_rack(rack_id).in_cell(c),
        None => n.in_rack(rack_id),
    };
    let mut t = Topology::default();
    let switch = format!("{rack_id}-SW");
    t.add_node(attach(Node::new(&switch, NodeKind::RackSwitch)))?;
    for i in 1..=n_servers {
        let kind = if i <= n_gateways {
            NodeKind::GatewayServer
        } else {
            NodeKind::Server
        };
        let id = format!("{rack_id}-S{i}");
        t.add_node(attach(Node::new(&id, kind)))?;
        t.add_link(Link::between(&switch, &id, 0.0, link_rate_gbps, Medium::Copper))?;
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestbedShape {
    /// Two processing cells joined by the IP/WDM core chain and the PON segment.
    Reference,
    /// The earlier five-hop setup: no core chain, feeder fibre straight to the OLT.
    Prior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestbedOptions {
    pub mode: InterconnectMode,
    pub racks_per_cell: usize,
    pub servers_per_rack: usize,
    pub gateways_per_rack: usize,
    pub rack_rate_gbps: f64,
    pub core_rate_gbps: f64,
    /// Fibre spans from cell A's exit gateway into and along the core chain;
    /// one core node per span.
    pub core_spans_km: Vec<f64>,
    /// Long-haul fibre terminating at the OLT.
    pub feeder_km: f64,
    /// Each of OLT–splitter and splitter–ONU.
    pub pon_drop_km: f64,
    pub seed: u64,
    /// `None` keeps the per-kind default processing delays.
    pub calibration: Option<CalibrationTargets>,
}

impl Default for TestbedOptions {
    fn default() -> Self {
        TestbedOptions {
            mode: InterconnectMode::Tdm,
            racks_per_cell: 3,
            servers_per_rack: 3,
            gateways_per_rack: 1,
            rack_rate_gbps: 10.0,
            core_rate_gbps: 100.0,
            core_spans_km: vec![15.0, 15.0, 15.0],
            feeder_km: 70.0,
            pon_drop_km: 0.5,
            seed: 2019,
            calibration: Some(CalibrationTargets::default()),
        }
    }
}

/// A processing cell: `racks` racks whose first gateways are fully meshed
/// over zero-length optical links.
pub fn build_cell(cell: &str, opts: &TestbedOptions) -> Result<Topology, TopoError> {
    let mut t = Topology::default();
    let mut gateways = Vec::new();
    for r in 1..=opts.racks_per_cell {
        let rack = format!("{cell}{r}");
        t.merge(rack_fragment(
            &rack,
            Some(cell),
            opts.servers_per_rack,
            opts.gateways_per_rack,
            opts.rack_rate_gbps,
        )?)?;
        gateways.push(format!("{rack}-S1"));
    }
    for (i, a) in gateways.iter().enumerate() {
        for b in &gateways[i + 1..] {
            t.add_link(Link::between(a, b, 0.0, opts.rack_rate_gbps, Medium::Fibre))?;
        }
    }
    Ok(t)
}

pub fn build_testbed(shape: TestbedShape, opts: &TestbedOptions) -> Result<ScenarioConfig, TopoError> {
    let mut t = Topology::new(opts.mode);
    t.merge(build_cell("A", opts)?)?;
    t.merge(build_cell("B", opts)?)?;

    let camera = "A1-CAM";
    t.add_node(Node::new(camera, NodeKind::Camera).in_rack("A1").in_cell("A"))?;
    t.add_link(Link::between("A1-SW", camera, 0.0, 1.0, Medium::Copper))?;

    let exit = "A1-S1";
    let olt = "OLT1";
    t.add_node(Node::new(olt, NodeKind::Olt).in_cell("B"))?;
    match shape {
        TestbedShape::Reference => {
            if opts.core_spans_km.is_empty() {
                return Err(TopoError::InvalidArgument(
                    "reference testbed needs at least one core span".into(),
                ));
            }
            let mut prev = exit.to_string();
            for (i, span) in opts.core_spans_km.iter().enumerate() {
                let core = format!("CORE{}", i + 1);
                t.add_node(Node::new(&core, NodeKind::CoreNode))?;
                t.add_link(Link::between(&prev, &core, *span, opts.core_rate_gbps, Medium::Fibre))?;
                prev = core;
            }
            t.add_link(Link::between(&prev, olt, opts.feeder_km, opts.core_rate_gbps, Medium::Fibre))?;
        }
        TestbedShape::Prior => {
            t.add_link(Link::between(exit, olt, opts.feeder_km, opts.rack_rate_gbps, Medium::Fibre))?;
        }
    }

    let splitter = match opts.mode {
        InterconnectMode::Tdm => Node::new("PON1-SPLIT", NodeKind::Coupler),
        InterconnectMode::Awgr => Node::new("PON1-AWGR", NodeKind::Awgr),
    }
    .in_cell("B");
    let splitter_id = splitter.id.clone();
    t.add_node(splitter)?;
    t.add_node(Node::new("ONU1", NodeKind::Onu).in_cell("B"))?;
    let pon = opts.rack_rate_gbps;
    t.add_link(Link::between(olt, &splitter_id, opts.pon_drop_km, pon, Medium::Fibre))?;
    t.add_link(Link::between(&splitter_id, "ONU1", opts.pon_drop_km, pon, Medium::Fibre))?;
    t.add_link(Link::between("ONU1", "B1-S1", 0.0, pon, Medium::Fibre))?;

    let mut scenario = ScenarioConfig {
        topology: t,
        seed: opts.seed,
        probe: ProbeConfig::default(),
        jitter: JitterModel::default(),
    };
    if let Some(targets) = &opts.calibration {
        let (src, dst) = scenario
            .default_endpoints()
            .expect("testbed always has servers");
        let cal = calibrate_processing_delays(
            &scenario.topology,
            &src,
            &dst,
            targets,
            &DelayConstants::default(),
            scenario.probe.probe_size_bytes,
        )
        .map_err(|e| TopoError::InvalidArgument(format!("calibration failed: {e}")))?;
        cal.apply(&mut scenario.topology)?;
    }
    Ok(scenario)
}

/// The end-to-end testbed with calibrated processing delays.
pub fn build_reference_testbed() -> ScenarioConfig {
    build_testbed(TestbedShape::Reference, &TestbedOptions::default())
        .expect("default reference testbed is well-formed")
}

/// The five-hop predecessor of the reference testbed.
pub fn build_prior_testbed() -> ScenarioConfig {
    build_testbed(TestbedShape::Prior, &TestbedOptions::default())
        .expect("default prior testbed is well-formed")
}
