//! Measurement methodology on top of the engine.
//!
//! Traceroute RTTs are cumulative to the hop that answered. A campaign runs
//! each iteration in its own engine on its own random stream, so iterations
//! can be spread over threads without changing a single output byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{map_indexed, Execution};
use crate::routing::{compute_tables, ForwardingTables};
use crate::simcore::{Engine, NodeIx, PacketId, PacketKind, SimError, SimOptions, SimTime, DEFAULT_TTL};
use crate::topo::{ScenarioConfig, Topology};

mod calibrate;
mod cbr;
mod compare;
mod report;

pub use calibrate::{calibrate_processing_delays, Calibration, CalibrationTargets};
pub use cbr::{
    cbr_outcome, run_cbr_flow, run_cbr_flow_sized, schedule_cbr_flow, CbrFlow, CbrResult, DEFAULT_CAMERA_RATE_MBPS,
    DEFAULT_CBR_PACKET_BYTES,
};
pub use compare::{compare_scaling, hop_increments, AddedHop, ScalingComparison, SharedHop};
pub use report::{
    fig6_rows, write_aggregate_csv, write_compare_csv, write_compare_summary_csv, write_fig6_csv,
    write_fig7_csv, write_probe_csv, Fig6Row,
};

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("no route from {src} to {dst}")]
    Unreachable { src: String, dst: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target for {node} is {residual_us:.3} us below its fixed delay")]
    Infeasible { node: String, residual_us: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub iterations: u32,
    pub probes_per_run: u32,
    pub probe_size_bytes: u32,
    pub inter_probe_gap_us: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            iterations: 10,
            probes_per_run: 150,
            probe_size_bytes: 64,
            inter_probe_gap_us: 1000.0,
        }
    }
}

impl ProbeConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.iterations == 0 || self.probes_per_run == 0 || self.probe_size_bytes == 0 {
            return Err(format!("probe counts and size must be positive: {self:?}"));
        }
        if !(self.inter_probe_gap_us.is_finite() && self.inter_probe_gap_us > 0.0) {
            return Err(format!("inter_probe_gap_us must be positive: {}", self.inter_probe_gap_us));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttStats {
    pub count: usize,
    pub mean_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

impl RttStats {
    pub fn from_samples(s: &[f64]) -> Option<RttStats> {
        if s.is_empty() {
            return None;
        }
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = (s.iter().sum::<f64>() / s.len() as f64).clamp(min, max);
        Some(RttStats {
            count: s.len(),
            mean_us: mean,
            min_us: min,
            max_us: max,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopStats {
    /// 1-based, equal to the TTL that reaches this hop.
    pub hop_index: usize,
    pub node_id: String,
    pub samples: Vec<f64>,
    pub mean_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSample {
    pub iteration: u32,
    pub probe_index: u32,
    pub hop_index: usize,
    /// The node that answered.
    pub node_id: String,
    pub rtt_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub src: String,
    pub dst: String,
    pub hops: Vec<HopStats>,
    pub end_to_end: Option<RttStats>,
    pub loss_fraction: f64,
    pub probes_sent: usize,
    /// Ordered by iteration, probe, hop.
    pub samples: Vec<ProbeSample>,
}

impl LatencyReport {
    fn unreachable(src: &str, dst: &str) -> Self {
        LatencyReport {
            src: src.into(),
            dst: dst.into(),
            hops: Vec::new(),
            end_to_end: None,
            loss_fraction: 1.0,
            probes_sent: 0,
            samples: Vec::new(),
        }
    }

    pub fn hop_means(&self) -> Vec<f64> {
        self.hops.iter().map(|h| h.mean_us).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PingResult {
    pub sent: usize,
    pub received: usize,
    pub loss_fraction: f64,
    pub rtt: Option<RttStats>,
    /// Per request, in send order; `None` if unanswered.
    pub rtts: Vec<Option<f64>>,
    pub request_ids: Vec<PacketId>,
}

fn lookup(e: &Engine, id: &str) -> Result<NodeIx, ProbeError> {
    e.node_index(id).ok_or_else(|| ProbeError::UnknownNode(id.into()))
}

/// Answers to delivered replies, keyed by the request that caused them.
fn answers(e: &Engine) -> BTreeMap<PacketId, (NodeIx, SimTime)> {
    e.packets()
        .iter()
        .filter(|p| p.kind.is_icmp_error_or_reply())
        .filter_map(|p| Some((p.in_reply_to?, (p.src, p.received_at?))))
        .collect()
}

/// `count` echo requests spaced by the configured gap, starting at the
/// engine clock; runs the engine until idle.
pub fn ping(
    engine: &mut Engine,
    src: &str,
    dst: &str,
    count: usize,
    cfg: &ProbeConfig,
) -> Result<PingResult, ProbeError> {
    let s = lookup(engine, src)?;
    let d = lookup(engine, dst)?;
    if s == d {
        return Ok(PingResult {
            sent: count,
            received: count,
            loss_fraction: 0.0,
            rtt: RttStats::from_samples(&vec![0.0; count]),
            rtts: vec![Some(0.0); count],
            request_ids: Vec::new(),
        });
    }
    let start = engine.now();
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let at = start + SimTime::from_us(i as f64 * cfg.inter_probe_gap_us);
        ids.push(engine.send_ix(PacketKind::EchoRequest, s, d, cfg.probe_size_bytes, DEFAULT_TTL, at)?);
    }
    engine.run();
    let got = answers(engine);
    let rtts: Vec<Option<f64>> = ids
        .iter()
        .map(|id| {
            let (_, at) = got.get(id)?;
            Some((*at - engine.packet(*id)?.sent_at).as_us())
        })
        .collect();
    let answered: Vec<f64> = rtts.iter().flatten().copied().collect();
    Ok(PingResult {
        sent: count,
        received: answered.len(),
        loss_fraction: if count == 0 { 0.0 } else { 1.0 - answered.len() as f64 / count as f64 },
        rtt: RttStats::from_samples(&answered),
        rtts,
        request_ids: ids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairPing {
    pub src: String,
    pub dst: String,
    pub result: PingResult,
}

/// Pings every ordered pair of distinct servers, each pair in a fresh engine
/// on its own random stream.
pub fn all_pairs_ping(s: &ScenarioConfig, count: usize, exec: Execution) -> Result<Vec<PairPing>, ProbeError> {
    let servers: Vec<String> = s.topology.servers().map(|n| n.id.clone()).collect();
    let pairs: Vec<(&String, &String)> = servers
        .iter()
        .flat_map(|a| servers.iter().filter(move |b| *b != a).map(move |b| (a, b)))
        .collect();
    let tables = compute_tables(&s.topology);
    let results = map_indexed(exec, pairs.len(), |i| {
        let opts = SimOptions {
            jitter: s.jitter,
            seed: s.seed,
            stream: i as u64,
            ..SimOptions::default()
        };
        let mut e = Engine::new(&s.topology, &tables, opts)?;
        let (a, b) = pairs[i];
        Ok(PairPing {
            src: a.clone(),
            dst: b.clone(),
            result: ping(&mut e, a, b, count, &s.probe)?,
        })
    });
    results.into_iter().collect()
}

/// Forwarding hops from `src` to `dst`: every L3 node after the source.
fn forwarding_hops(e: &Engine, s: NodeIx, d: NodeIx) -> Option<Vec<NodeIx>> {
    let path = e.path(s, d)?;
    Some(path.into_iter().skip(1).filter(|n| e.node_kind(*n).is_l3()).collect())
}

struct Sent {
    iteration: u32,
    probe_index: u32,
    hop_index: usize,
    id: PacketId,
}

#[allow(clippy::too_many_arguments)]
fn schedule_iteration(
    e: &mut Engine,
    s: NodeIx,
    d: NodeIx,
    hops: usize,
    iteration: u32,
    start: SimTime,
    cfg: &ProbeConfig,
    out: &mut Vec<Sent>,
) -> Result<(), ProbeError> {
    if hops > u8::MAX as usize {
        return Err(ProbeError::InvalidArgument(format!("{hops} hops exceed the TTL range")));
    }
    for j in 0..cfg.probes_per_run {
        for ttl in 1..=hops {
            let slot = j as usize * hops + ttl - 1;
            let at = start + SimTime::from_us(slot as f64 * cfg.inter_probe_gap_us);
            let id = e.send_ix(PacketKind::EchoRequest, s, d, cfg.probe_size_bytes, ttl as u8, at)?;
            out.push(Sent {
                iteration,
                probe_index: j,
                hop_index: ttl,
                id,
            });
        }
    }
    Ok(())
}

fn collect(e: &Engine, sent: &[Sent]) -> Vec<ProbeSample> {
    let got = answers(e);
    sent.iter()
        .filter_map(|p| {
            let (node, at) = got.get(&p.id)?;
            Some(ProbeSample {
                iteration: p.iteration,
                probe_index: p.probe_index,
                hop_index: p.hop_index,
                node_id: e.node_id(*node).to_string(),
                rtt_us: (*at - e.packet(p.id)?.sent_at).as_us(),
            })
        })
        .collect()
}

fn aggregate(src: &str, dst: &str, hop_ids: Vec<String>, samples: Vec<ProbeSample>, sent: usize) -> LatencyReport {
    let mut per_hop: Vec<Vec<f64>> = vec![Vec::new(); hop_ids.len()];
    for s in &samples {
        per_hop[s.hop_index - 1].push(s.rtt_us);
    }
    let hops: Vec<HopStats> = hop_ids
        .into_iter()
        .zip(per_hop)
        .enumerate()
        .map(|(i, (node_id, samples))| {
            let st = RttStats::from_samples(&samples);
            HopStats {
                hop_index: i + 1,
                node_id,
                mean_us: st.map_or(0.0, |s| s.mean_us),
                min_us: st.map_or(0.0, |s| s.min_us),
                max_us: st.map_or(0.0, |s| s.max_us),
                samples,
            }
        })
        .collect();
    let end_to_end = hops.last().and_then(|h| RttStats::from_samples(&h.samples));
    LatencyReport {
        src: src.into(),
        dst: dst.into(),
        loss_fraction: if sent == 0 { 0.0 } else { 1.0 - samples.len() as f64 / sent as f64 },
        probes_sent: sent,
        hops,
        end_to_end,
        samples,
    }
}

/// Runs every iteration inside `engine`, one after another.
pub fn traceroute(engine: &mut Engine, src: &str, dst: &str, cfg: &ProbeConfig) -> Result<LatencyReport, ProbeError> {
    cfg.check().map_err(ProbeError::InvalidArgument)?;
    let s = lookup(engine, src)?;
    let d = lookup(engine, dst)?;
    let Some(hops) = forwarding_hops(engine, s, d) else {
        return Ok(LatencyReport::unreachable(src, dst));
    };
    let per_iteration = SimTime::from_us(cfg.probes_per_run as f64 * hops.len() as f64 * cfg.inter_probe_gap_us);
    let mut sent = Vec::new();
    let mut start = engine.now();
    for it in 0..cfg.iterations {
        schedule_iteration(engine, s, d, hops.len(), it, start, cfg, &mut sent)?;
        start = start + per_iteration;
    }
    engine.run();
    let ids = hops.iter().map(|h| engine.node_id(*h).to_string()).collect();
    Ok(aggregate(src, dst, ids, collect(engine, &sent), sent.len()))
}

/// Traceroute campaign: iteration `i` runs in a fresh engine built from
/// `opts` with random stream `i`.
pub fn traceroute_campaign(
    t: &Topology,
    tables: &ForwardingTables,
    opts: &SimOptions,
    src: &str,
    dst: &str,
    cfg: &ProbeConfig,
    exec: Execution,
) -> Result<LatencyReport, ProbeError> {
    cfg.check().map_err(ProbeError::InvalidArgument)?;
    let probe = Engine::new(t, tables, opts.clone())?;
    let s = lookup(&probe, src)?;
    let d = lookup(&probe, dst)?;
    let Some(hops) = forwarding_hops(&probe, s, d) else {
        return Ok(LatencyReport::unreachable(src, dst));
    };
    let runs = map_indexed(exec, cfg.iterations as usize, |it| {
        let o = SimOptions {
            stream: it as u64,
            ..opts.clone()
        };
        let mut e = Engine::new(t, tables, o)?;
        let mut sent = Vec::new();
        schedule_iteration(&mut e, s, d, hops.len(), it as u32, SimTime::ZERO, cfg, &mut sent)?;
        e.run();
        Ok::<_, ProbeError>((collect(&e, &sent), sent.len()))
    });
    let mut samples = Vec::new();
    let mut sent = 0;
    for r in runs {
        let (s, n) = r?;
        samples.extend(s);
        sent += n;
    }
    let ids = hops.iter().map(|h| probe.node_id(*h).to_string()).collect();
    Ok(aggregate(src, dst, ids, samples, sent))
}

/// Campaign with the scenario's seed, jitter and probe settings.
pub fn scenario_traceroute(
    s: &ScenarioConfig,
    src: &str,
    dst: &str,
    exec: Execution,
) -> Result<LatencyReport, ProbeError> {
    let opts = SimOptions {
        jitter: s.jitter,
        seed: s.seed,
        ..SimOptions::default()
    };
    traceroute_campaign(&s.topology, &compute_tables(&s.topology), &opts, src, dst, &s.probe, exec)
}
