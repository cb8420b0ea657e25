mod common;

use common::{oracle_route, oracle_rtt_us};
use ponsim::probes::{
    calibrate_processing_delays, compare_scaling, hop_increments, ping, schedule_cbr_flow, cbr_outcome,
    scenario_traceroute, CalibrationTargets,
};
use ponsim::routing::{compute_tables, route};
use ponsim::simcore::{DelayConstants, Engine, JitterModel, PacketKind, PacketStatus, SimOptions};
use ponsim::topo::builders::{build_cell, TestbedOptions};
use ponsim::topo::{
    build_prior_testbed, build_reference_testbed, InterconnectMode, Link, Medium, Node, NodeKind,
    ScenarioConfig, Topology,
};
use ponsim::Execution;

fn quiet(mut s: ScenarioConfig) -> ScenarioConfig {
    s.jitter = JitterModel::none();
    s
}

fn zero_jitter_engine(t: &Topology) -> Engine {
    let opts = SimOptions {
        jitter: JitterModel::none(),
        ..SimOptions::default()
    };
    Engine::new(t, &compute_tables(t), opts).unwrap()
}

#[test]
fn cell_routes_match_exhaustive_search() {
    let t = build_cell("R", &TestbedOptions::default()).unwrap();
    let tables = compute_tables(&t);
    let ids: Vec<String> = t.nodes().map(|n| n.id.clone()).collect();
    for a in &ids {
        for b in &ids {
            let got = route(&tables, &t, a, b).unwrap();
            let (nodes, links) = oracle_route(&t, a, b).unwrap();
            assert_eq!(got.nodes, nodes, "{a} -> {b}");
            assert_eq!(got.links, links, "{a} -> {b}");
        }
    }
}

#[test]
fn reference_server_routes_match_exhaustive_search() {
    let s = build_reference_testbed();
    let tables = compute_tables(&s.topology);
    let servers: Vec<String> = s.topology.servers().map(|n| n.id.clone()).collect();
    for a in &servers {
        for b in &servers {
            let got = route(&tables, &s.topology, a, b).unwrap();
            assert_eq!(got.nodes, oracle_route(&s.topology, a, b).unwrap().0, "{a} -> {b}");
        }
    }
}

#[test]
fn cell_ping_matches_closed_form() {
    let t = build_cell("R", &TestbedOptions::default()).unwrap();
    let servers: Vec<String> = t.servers().map(|n| n.id.clone()).collect();
    for a in &servers {
        for b in &servers {
            if a == b {
                continue;
            }
            let mut e = zero_jitter_engine(&t);
            let r = ping(&mut e, a, b, 1, &Default::default()).unwrap();
            let want = oracle_rtt_us(&t, a, b, 64).unwrap();
            let got = r.rtt.unwrap().mean_us;
            assert!((got - want).abs() <= 0.001, "{a} -> {b}: {got} vs {want}");
        }
    }
}

#[test]
fn end_to_end_ping_matches_closed_form() {
    for s in [build_reference_testbed(), build_prior_testbed()] {
        let (a, b) = s.default_endpoints().unwrap();
        let mut e = zero_jitter_engine(&s.topology);
        let r = ping(&mut e, &a, &b, 3, &s.probe).unwrap();
        let want = oracle_rtt_us(&s.topology, &a, &b, s.probe.probe_size_bytes).unwrap();
        let st = r.rtt.unwrap();
        assert!((st.min_us - want).abs() <= 0.001 && (st.max_us - want).abs() <= 0.001);
    }
}

#[test]
fn reference_path_is_long_haul() {
    let s = build_reference_testbed();
    let tables = compute_tables(&s.topology);
    let r = route(&tables, &s.topology, "A1-S1", "B3-S3").unwrap();
    assert!(r.len_km(&s.topology) > 110.0);
}

#[test]
fn calibration_is_a_fixed_point() {
    for s in [build_reference_testbed(), build_prior_testbed()] {
        let s = quiet(s);
        let (a, b) = s.default_endpoints().unwrap();
        let r = scenario_traceroute(&s, &a, &b, Execution::Sequential).unwrap();
        let targets = CalibrationTargets::default();
        for (h, inc) in r.hops.iter().zip(hop_increments(&r)) {
            let kind = s.topology.node(&h.node_id).unwrap().kind();
            assert!((inc - targets.target_for(kind)).abs() < 1.0, "{}: {inc}", h.node_id);
        }
        let means = r.hop_means();
        assert!(means.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn recalibrating_a_calibrated_testbed_changes_nothing() {
    let s = build_reference_testbed();
    let (a, b) = s.default_endpoints().unwrap();
    let c = calibrate_processing_delays(
        &s.topology,
        &a,
        &b,
        &CalibrationTargets::default(),
        &DelayConstants::default(),
        s.probe.probe_size_bytes,
    )
    .unwrap();
    for (id, d) in &c.delays {
        let before = s.topology.node(id).unwrap().processing_delay_us;
        assert!((before - d).abs() < 1e-9, "{id}");
    }
}

#[test]
fn scaling_comparison_is_additive() {
    let base = quiet(build_prior_testbed());
    let var = quiet(build_reference_testbed());
    let (a, b) = base.default_endpoints().unwrap();
    let rb = scenario_traceroute(&base, &a, &b, Execution::Sequential).unwrap();
    let rv = scenario_traceroute(&var, &a, &b, Execution::Sequential).unwrap();
    let c = compare_scaling(&rb, &rv);
    assert_eq!(c.shared.len(), 5);
    assert_eq!(c.added.len(), 3);
    assert!(c.max_abs_shared_delta_us() < 1.0);
    assert!((c.end_to_end_diff_us() - c.added_increment_sum_us).abs() < 1.0);

    let same = compare_scaling(&rv, &rv);
    assert!(same.shared.iter().all(|h| h.delta_us == 0.0));
    assert!(same.added.is_empty() && same.end_to_end_diff_us() == 0.0);
}

/// H - OLT - SPL - ONU{a,b,c} - S{a,b,c}; all zero-length, zero processing,
/// 1 Gbps, so a 64 B packet spends 0.512 us per link.
fn three_onu_pon() -> Topology {
    let mut t = Topology::new(InterconnectMode::Tdm);
    let add = |t: &mut Topology, id: &str, k| t.add_node(Node::new(id, k).with_delay(0.0)).unwrap();
    add(&mut t, "H", NodeKind::Server);
    add(&mut t, "OLT", NodeKind::Olt);
    add(&mut t, "SPL", NodeKind::Coupler);
    t.add_link(Link::between("H", "OLT", 0.0, 1.0, Medium::Fibre)).unwrap();
    t.add_link(Link::between("OLT", "SPL", 0.0, 1.0, Medium::Fibre)).unwrap();
    for x in ["a", "b", "c"] {
        let onu = format!("ONU{x}");
        let srv = format!("S{x}");
        add(&mut t, &onu, NodeKind::Onu);
        add(&mut t, &srv, NodeKind::Server);
        t.add_link(Link::between("SPL", &onu, 0.0, 1.0, Medium::Fibre)).unwrap();
        t.add_link(Link::between(&onu, &srv, 0.0, 1.0, Medium::Fibre)).unwrap();
    }
    t
}

#[test]
fn upstream_waits_for_own_slot() {
    let t = three_onu_pon();
    let slot = 125.0 / 3.0;
    // the packet reaches its ONU after one link; Sa is inside its slot and
    // goes straight on, the others leave the ONU at their slot start
    for (src, want) in [
        ("Sa", 4.0 * 0.512),
        ("Sb", slot + 3.0 * 0.512),
        ("Sc", 2.0 * slot + 3.0 * 0.512),
    ] {
        let mut e = zero_jitter_engine(&t);
        let id = e.send(PacketKind::Data, src, "H", 64, 64, 0.0).unwrap();
        e.run();
        let got = e.packet(id).unwrap().received_at_us().unwrap();
        assert!((got - want).abs() <= 0.001, "{src}: {got}");
    }
    // a packet missing its slot waits a full frame
    let mut e = zero_jitter_engine(&t);
    let id = e.send(PacketKind::Data, "Sa", "H", 64, 64, 50.0).unwrap();
    e.run();
    let got = e.packet(id).unwrap().received_at_us().unwrap();
    assert!((got - (125.0 + 3.0 * 0.512)).abs() <= 0.001, "{got}");
    // downstream never waits
    let mut e = zero_jitter_engine(&t);
    let id = e.send(PacketKind::Data, "H", "Sc", 64, 64, 0.0).unwrap();
    e.run();
    assert!((e.packet(id).unwrap().received_at_us().unwrap() - 4.0 * 0.512).abs() <= 0.001);
}

#[test]
fn cbr_load_inflates_ping_by_at_most_one_packet_per_link() {
    let t = build_cell("R", &TestbedOptions::default()).unwrap();
    let (src, dst) = ("R1-S2", "R3-S3");
    let cfg = Default::default();

    let mut idle = zero_jitter_engine(&t);
    let base = ping(&mut idle, src, dst, 20, &cfg).unwrap().rtt.unwrap().max_us;

    let mut busy = zero_jitter_engine(&t);
    let flow = schedule_cbr_flow(&mut busy, src, dst, 9000.0, 25_000.0, 1200).unwrap();
    let loaded = ping(&mut busy, src, dst, 20, &cfg).unwrap();
    assert_eq!(loaded.loss_fraction, 0.0);
    assert_eq!(cbr_outcome(&busy, &flow).delivered_fraction, 1.0);

    let shared_links = route(&compute_tables(&t), &t, src, dst).unwrap().links.len();
    let bound = shared_links as f64 * 1200.0 * 8.0 / 10_000.0;
    let inflation = loaded.rtt.unwrap().max_us - base;
    assert!(inflation >= 0.0 && inflation <= bound + 1e-6, "{inflation} > {bound}");
}

#[test]
fn ping_loss_equals_dropped_packets() {
    let s = build_reference_testbed();
    let mut tables = compute_tables(&s.topology);
    tables.remove_entry("OLT1", "A1-S1");
    let mut e = Engine::new(&s.topology, &tables, SimOptions::default()).unwrap();
    let r = ping(&mut e, "A1-S1", "B3-S3", 10, &s.probe).unwrap();
    let dropped = e
        .packets()
        .iter()
        .filter(|p| matches!(p.status, PacketStatus::Dropped(_)))
        .filter(|p| r.request_ids.contains(&p.id) || p.in_reply_to.is_some_and(|q| r.request_ids.contains(&q)))
        .count();
    assert_eq!(r.loss_fraction, dropped as f64 / 10.0);
    assert_eq!(r.loss_fraction, 1.0);
    assert!(e.conservation().holds());
}

#[test]
fn default_scenario_has_no_loss_anywhere() {
    let s = build_reference_testbed();
    let all = ponsim::probes::all_pairs_ping(&s, 2, Execution::Parallel).unwrap();
    let n = s.topology.servers().count();
    assert_eq!(all.len(), n * (n - 1));
    assert!(all.iter().all(|p| p.result.loss_fraction == 0.0));
}
