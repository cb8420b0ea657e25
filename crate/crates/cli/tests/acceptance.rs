//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{oracle_route, oracle_rtt_us};
use ponsim::probes::{all_pairs_ping, hop_increments, ping, run_cbr_flow, scenario_traceroute};
use ponsim::routing::{assign_wavelengths, awgr_output_port, compute_tables, route, RoutingError};
use ponsim::simcore::{Engine, JitterModel, PacketKind, SimOptions};
use ponsim::topo::builders::{build_cell, TestbedOptions};
use ponsim::topo::{build_reference_testbed, InterconnectMode, Link, Medium, Node, NodeKind, Topology};
use ponsim::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HOP_MEAN_MIN_US: f64 = 195.8;
const HOP_MEAN_MAX_US: f64 = 1761.9;
const END_TO_END_MAX_US: f64 = 2000.0;
const CAMPAIGN_BUDGET: Duration = Duration::from_secs(5);
const INCREMENT_TOL_US: f64 = 1.0;
const SHARED_DELTA_MAX_US: f64 = 1.0;
const ORACLE_TOL_US: f64 = 0.001;

type Verdict = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn ponsim(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_ponsim"))
        .args(args)
        .env_remove("SIM_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "ponsim {} exited {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr).trim()
        ))
    }
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn num(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("not a number: {s:?}"))
}

fn criterion_1(work: &Path) -> Verdict {
    let out = work.join("c1");
    let started = Instant::now();
    ponsim(&["traceroute", "builtin:ref8", "--out", out.to_str().unwrap()])?;
    let elapsed = started.elapsed();
    let agg = csv_rows(&out.join("aggregate.csv"))?;
    let means = agg.iter().map(|r| num(&r[2])).collect::<Result<Vec<_>, _>>()?;
    let e2e = *means.last().ok_or("no hops")?;
    let out_of_band: Vec<String> = agg
        .iter()
        .zip(&means)
        .filter(|(_, m)| !(HOP_MEAN_MIN_US..=HOP_MEAN_MAX_US).contains(*m))
        .map(|(r, m)| format!("{}={m:.1}", r[1]))
        .collect();
    let detail = format!(
        "hop means {:.1}..{:.1} us, end-to-end {e2e:.1} us, {:.2} s",
        means.iter().cloned().fold(f64::INFINITY, f64::min),
        means.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        elapsed.as_secs_f64()
    );
    if out_of_band.is_empty() && e2e < END_TO_END_MAX_US && elapsed < CAMPAIGN_BUDGET {
        Ok(detail)
    } else {
        Err(format!("{detail}; outside [{HOP_MEAN_MIN_US}, {HOP_MEAN_MAX_US}]: {}", out_of_band.join(" ")))
    }
}

fn criterion_2() -> Verdict {
    let mut s = build_reference_testbed();
    s.jitter = JitterModel::none();
    let (a, b) = s.default_endpoints().ok_or("no endpoints")?;
    let r = scenario_traceroute(&s, &a, &b, Execution::Parallel).map_err(|e| e.to_string())?;
    let inc = hop_increments(&r);
    let near = |v: f64, t: f64| (v - t).abs() <= INCREMENT_TOL_US;
    let big = inc.iter().filter(|v| near(**v, 900.0)).count();
    let small = inc.iter().filter(|v| near(**v, 200.0)).count();
    let shown: Vec<String> = inc.iter().map(|v| format!("{v:.3}")).collect();
    let detail = format!("increments {}", shown.join(" "));
    if big == 1 && small == inc.len() - 1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3() -> Verdict {
    let s = build_reference_testbed();
    let pairs = all_pairs_ping(&s, 10, Execution::Parallel).map_err(|e| e.to_string())?;
    let lossy: Vec<String> = pairs
        .iter()
        .filter(|p| p.result.loss_fraction != 0.0)
        .map(|p| format!("{}->{}", p.src, p.dst))
        .collect();
    let (_, last) = s.default_endpoints().ok_or("no endpoints")?;
    let mut e = Engine::from_scenario(&s).map_err(|e| e.to_string())?;
    let cbr = run_cbr_flow(&mut e, "A1-CAM", &last, 10.0, 1_000_000.0).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} pairs, {} lossy; camera flow {}/{} delivered",
        pairs.len(),
        lossy.len(),
        cbr.delivered,
        cbr.sent
    );
    if lossy.is_empty() && cbr.delivered_fraction == 1.0 {
        Ok(detail)
    } else {
        Err(format!("{detail} {}", lossy.join(" ")))
    }
}

fn criterion_4(work: &Path) -> Verdict {
    let out = work.join("c1");
    let agg = csv_rows(&out.join("aggregate.csv"))?;
    let probes = csv_rows(&out.join("probes.csv"))?;
    let mut per: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in &probes {
        *per.entry((r[0].clone(), r[2].clone())).or_default() += 1;
    }
    let iterations: BTreeSet<&String> = per.keys().map(|k| &k.0).collect();
    let samples_ok = agg.iter().all(|r| r[5] == "1500");
    let runs_ok = per.values().all(|n| *n == 150);
    let detail = format!(
        "{} hop rows, {} iterations, {} samples",
        agg.len(),
        iterations.len(),
        probes.len()
    );
    if agg.len() == 8 && iterations.len() == 10 && per.len() == 80 && samples_ok && runs_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5(work: &Path) -> Verdict {
    let out = work.join("c5");
    ponsim(&[
        "compare",
        "--baseline",
        "builtin:prior5",
        "--variant",
        "builtin:ref8",
        "--out",
        out.to_str().unwrap(),
    ])?;
    let m: BTreeMap<String, f64> = csv_rows(&out.join("compare_summary.csv"))?
        .into_iter()
        .map(|r| Ok((r[0].clone(), num(&r[1])?)))
        .collect::<Result<_, String>>()?;
    let shared = m.get("shared_hops").copied().unwrap_or(0.0);
    let delta = m.get("max_abs_shared_delta_us").copied().unwrap_or(f64::INFINITY);
    let detail = format!("{shared} shared hops, max delta {delta:.6} us");
    if shared > 0.0 && delta < SHARED_DELTA_MAX_US {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Verdict {
    let t = build_cell("R", &TestbedOptions::default()).map_err(|e| e.to_string())?;
    let tables = compute_tables(&t);
    let ids: Vec<String> = t.nodes().map(|n| n.id.clone()).collect();
    let mut routes = 0;
    for a in &ids {
        for b in &ids {
            let got = route(&tables, &t, a, b).map_err(|e| e.to_string())?;
            let (nodes, links) = oracle_route(&t, a, b).ok_or(format!("oracle: no path {a}->{b}"))?;
            if got.nodes != nodes || got.links != links {
                return Err(format!("{a}->{b}: {:?} vs {:?}", got.nodes, nodes));
            }
            routes += 1;
        }
    }
    let servers: Vec<String> = t.servers().map(|n| n.id.clone()).collect();
    let mut worst = 0.0f64;
    let mut pings = 0;
    for a in &servers {
        for b in servers.iter().filter(|b| *b != a) {
            let opts = SimOptions {
                jitter: JitterModel::none(),
                ..SimOptions::default()
            };
            let mut e = Engine::new(&t, &tables, opts).map_err(|e| e.to_string())?;
            let r = ping(&mut e, a, b, 1, &Default::default()).map_err(|e| e.to_string())?;
            let got = r.rtt.ok_or(format!("{a}->{b}: no reply"))?.mean_us;
            let want = oracle_rtt_us(&t, a, b, 64).ok_or("oracle: no path")?;
            worst = worst.max((got - want).abs());
            pings += 1;
        }
    }
    let detail = format!("{routes} routes match, {pings} pings, worst RTT error {worst:.6} us");
    if worst <= ORACLE_TOL_US {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn awgr_star(heads: usize, tails: usize, wavelengths: u32) -> Topology {
    let mut t = Topology::new(InterconnectMode::Awgr);
    t.add_node(Node::new("AWG", NodeKind::Awgr).with_wavelengths(Some(wavelengths))).unwrap();
    for (prefix, kind, n) in [("OLT", NodeKind::Olt, heads), ("ONU", NodeKind::Onu, tails)] {
        for i in 0..n {
            let id = format!("{prefix}{i:02}");
            let srv = format!("{prefix}{i:02}-S");
            t.add_node(Node::new(&id, kind)).unwrap();
            t.add_node(Node::new(&srv, NodeKind::Server)).unwrap();
            t.add_link(Link::between("AWG", &id, 1.0, 10.0, Medium::Fibre)).unwrap();
            t.add_link(Link::between(&id, &srv, 0.0, 10.0, Medium::Fibre)).unwrap();
        }
    }
    t
}

fn criterion_7() -> Verdict {
    for n in 1..=16usize {
        for fixed in 0..n {
            let by_input: BTreeSet<usize> = (0..n).map(|i| awgr_output_port(i, fixed, n).unwrap()).collect();
            let by_wavelength: BTreeSet<usize> = (0..n).map(|w| awgr_output_port(fixed, w, n).unwrap()).collect();
            if by_input.len() != n || by_wavelength.len() != n {
                return Err(format!("not a bijection for N={n}"));
            }
        }
    }
    let (mut assigned, mut exhausted) = (0, 0);
    for trial in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let heads = rng.gen_range(1..=6);
        let tails = rng.gen_range(1..=16);
        let w = rng.gen_range(1..=24);
        let t = awgr_star(heads, tails, w);
        let flows: Vec<(String, String)> = (0..rng.gen_range(1..40))
            .map(|_| {
                let h = format!("OLT{:02}-S", rng.gen_range(0..heads));
                let tl = format!("ONU{:02}-S", rng.gen_range(0..tails));
                if rng.gen_bool(0.5) {
                    (h, tl)
                } else {
                    (tl, h)
                }
            })
            .collect();
        let a = match assign_wavelengths(&t, &compute_tables(&t), &flows) {
            Ok(a) => a,
            Err(RoutingError::Exhausted { .. }) => {
                exhausted += 1;
                continue;
            }
            Err(e) => return Err(format!("trial {trial}: {e}")),
        };
        let mut lit: BTreeSet<(String, String, usize, u32)> = BTreeSet::new();
        for c in &a.crossings {
            let wl = a.wavelengths[&c.flow];
            if awgr_output_port(c.head_port, wl as usize, c.n_ports).ok() != Some(c.tail_port) {
                return Err(format!("trial {trial}: flow {} misrouted", c.flow));
            }
            if !lit.insert((c.awgr.clone(), format!("{:?}", c.entry_side), c.entry_port(), wl)) {
                return Err(format!("trial {trial}: wavelength {wl} reused on one input port"));
            }
        }
        assigned += 1;
    }
    Ok(format!("N=1..16 bijective; 1000 trials, {assigned} assigned, {exhausted} exhausted"))
}

fn criterion_8(work: &Path) -> Verdict {
    let runs: [&[&str]; 7] = [
        &["traceroute", "builtin:ref8", "--iterations", "3", "--probes", "20", "--seed", "42"],
        &["fig", "builtin:ref8", "--figure", "6", "--probes", "20", "--seed", "42"],
        &["fig", "builtin:ref8", "--figure", "7", "--probes", "20", "--seed", "42"],
        &["ping", "builtin:ref8", "--count", "20", "--trace", "--seed", "42"],
        &["cbr", "builtin:ref8", "--duration-us", "100000", "--seed", "42"],
        &["compare", "--baseline", "builtin:prior5", "--variant", "builtin:ref8"],
        &["routes", "builtin:ref8"],
    ];
    let mut files = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for copy in ["x", "y"] {
            let out = work.join(format!("c8-{i}{copy}"));
            let mut full = args.to_vec();
            full.extend(["--out", out.to_str().unwrap()]);
            ponsim(&full)?;
            outputs.push(out);
        }
        for entry in fs::read_dir(&outputs[0]).map_err(|e| e.to_string())? {
            let name = entry.map_err(|e| e.to_string())?.file_name();
            if !name.to_string_lossy().ends_with(".csv") {
                continue;
            }
            let a = fs::read(outputs[0].join(&name)).map_err(|e| e.to_string())?;
            let b = fs::read(outputs[1].join(&name)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{} differs for `{}`", name.to_string_lossy(), args.join(" ")));
            }
            files += 1;
        }
    }

    let s = build_reference_testbed();
    let servers: Vec<String> = s.topology.servers().map(|n| n.id.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for round in 0..20 {
        let opts = SimOptions {
            seed: round,
            queue_cap: Some(rng.gen_range(1..8)),
            ..SimOptions::default()
        };
        let mut e = Engine::new(&s.topology, &compute_tables(&s.topology), opts).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let a = &servers[rng.gen_range(0..servers.len())];
            let b = &servers[rng.gen_range(0..servers.len())];
            if a == b {
                continue;
            }
            let kind = if rng.gen_bool(0.5) { PacketKind::EchoRequest } else { PacketKind::Data };
            e.send(kind, a, b, rng.gen_range(64..1500), rng.gen_range(1..=64), rng.gen_range(0.0..5000.0))
                .map_err(|e| e.to_string())?;
        }
        e.run();
        let c = e.conservation();
        if !c.holds() || c.in_flight != 0 {
            return Err(format!("round {round}: {c:?}"));
        }
    }
    Ok(format!("{files} output files byte-identical over 7 commands; conservation held in 20 traffic rounds"))
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temp dir");
    let w = work.path();
    let checks: [Check; 8] = [
        ("reference campaign hop means and runtime", Box::new(|| criterion_1(w))),
        ("zero-jitter per-hop increments", Box::new(criterion_2)),
        ("no loss on pings and camera flow", Box::new(criterion_3)),
        ("sample counts per hop and run", Box::new(|| criterion_4(w))),
        ("scaling leaves shared hops unchanged", Box::new(|| criterion_5(w))),
        ("cell routes and RTTs against oracles", Box::new(criterion_6)),
        ("AWGR port mapping and wavelength reuse", Box::new(criterion_7)),
        ("reproducible outputs and packet conservation", Box::new(|| criterion_8(w))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(d) => println!("criterion {}: PASS  {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {d}", i + 1);
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
