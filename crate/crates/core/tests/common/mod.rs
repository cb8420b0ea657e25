//! Reference computations that share no code with the library: exhaustive
//! path search and hand-written delay arithmetic.
#![allow(dead_code)]

use ponsim::topo::{Medium, NodeKind, Topology};

const FIBRE_US_PER_KM: f64 = 4.9;
const COPPER_US_PER_KM: f64 = 5.4;

fn relays(k: NodeKind) -> bool {
    !matches!(k, NodeKind::Server | NodeKind::Camera)
}

/// Shortest path under the relay policy, found by enumerating every simple
/// path; ties go to the lexicographically smallest node sequence, then link
/// sequence.
pub fn oracle_route(t: &Topology, src: &str, dst: &str) -> Option<(Vec<String>, Vec<String>)> {
    let mut best: Option<(Vec<String>, Vec<String>)> = None;
    let mut nodes = vec![src.to_string()];
    let mut links = Vec::new();
    dfs(t, dst, &mut nodes, &mut links, &mut best);
    best
}

fn dfs(
    t: &Topology,
    dst: &str,
    nodes: &mut Vec<String>,
    links: &mut Vec<String>,
    best: &mut Option<(Vec<String>, Vec<String>)>,
) {
    let cur = nodes.last().unwrap().clone();
    if cur == dst {
        let cand = (nodes.clone(), links.clone());
        let better = match best {
            None => true,
            Some(b) => (cand.0.len(), &cand.0, &cand.1) < (b.0.len(), &b.0, &b.1),
        };
        if better {
            *best = Some(cand);
        }
        return;
    }
    if let Some(b) = best {
        if nodes.len() >= b.0.len() {
            return;
        }
    }
    if nodes.len() > 1 && !relays(t.node(&cur).unwrap().kind()) {
        return;
    }
    let next: Vec<(String, String)> = t
        .links()
        .filter_map(|l| {
            let other = if l.a == cur {
                &l.b
            } else if l.b == cur {
                &l.a
            } else {
                return None;
            };
            Some((other.clone(), l.id.clone()))
        })
        .collect();
    for (n, l) in next {
        if nodes.contains(&n) || t.node(&n).is_none() {
            continue;
        }
        nodes.push(n);
        links.push(l);
        dfs(t, dst, nodes, links, best);
        nodes.pop();
        links.pop();
    }
}

/// Sum of processing at every node plus propagation and serialisation on
/// every link.
pub fn oracle_one_way_us(t: &Topology, nodes: &[String], links: &[String], size_bytes: u32) -> f64 {
    let procs: f64 = nodes.iter().map(|n| t.node(n).unwrap().processing_delay_us).sum();
    let wires: f64 = links
        .iter()
        .map(|l| {
            let l = t.link(l).unwrap();
            let per_km = match l.medium {
                Medium::Fibre => FIBRE_US_PER_KM,
                Medium::Copper => COPPER_US_PER_KM,
            };
            l.length_km * per_km + size_bytes as f64 * 8.0 / (l.rate_gbps * 1000.0)
        })
        .sum();
    procs + wires
}

/// Zero-jitter, empty-network RTT when no TDM coupler has more than one
/// sender.
pub fn oracle_rtt_us(t: &Topology, src: &str, dst: &str, size_bytes: u32) -> Option<f64> {
    let (fn_, fl) = oracle_route(t, src, dst)?;
    let (rn, rl) = oracle_route(t, dst, src)?;
    Some(oracle_one_way_us(t, &fn_, &fl, size_bytes) + oracle_one_way_us(t, &rn, &rl, size_bytes))
}
