use super::{lookup, ProbeError};
use crate::simcore::{Engine, PacketId, PacketKind, PacketStatus, SimTime, DEFAULT_TTL};

pub const DEFAULT_CBR_PACKET_BYTES: u32 = 1200;
pub const DEFAULT_CAMERA_RATE_MBPS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CbrFlow {
    pub ids: Vec<PacketId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbrResult {
    pub sent: usize,
    pub delivered: usize,
    pub delivered_fraction: f64,
    pub max_queue_depth: usize,
}

/// Schedules a constant-rate stream of Data packets from the engine clock
/// for `duration_us`, without running the engine.
pub fn schedule_cbr_flow(
    engine: &mut Engine,
    src: &str,
    dst: &str,
    rate_mbps: f64,
    duration_us: f64,
    packet_bytes: u32,
) -> Result<CbrFlow, ProbeError> {
    let s = lookup(engine, src)?;
    let d = lookup(engine, dst)?;
    if s == d {
        return Err(ProbeError::InvalidArgument("flow endpoints coincide".into()));
    }
    if !(rate_mbps > 0.0 && rate_mbps.is_finite()) || !(duration_us >= 0.0) || packet_bytes == 0 {
        return Err(ProbeError::InvalidArgument(format!(
            "rate {rate_mbps} Mbps, duration {duration_us} us, {packet_bytes} B packets"
        )));
    }
    let links = engine.path_links(s, d).ok_or_else(|| ProbeError::Unreachable {
        src: src.into(),
        dst: dst.into(),
    })?;
    let bottleneck_mbps = links.iter().map(|(g, _)| g * 1e3).fold(f64::INFINITY, f64::min);
    if rate_mbps > bottleneck_mbps {
        return Err(ProbeError::InvalidArgument(format!(
            "{rate_mbps} Mbps exceeds the {bottleneck_mbps} Mbps bottleneck"
        )));
    }
    let interval = packet_bytes as f64 * 8.0 / rate_mbps;
    let start = engine.now();
    let mut ids = Vec::new();
    let mut i = 0u64;
    while (i as f64) * interval < duration_us {
        let at = start + SimTime::from_us(i as f64 * interval);
        ids.push(engine.send_ix(PacketKind::Data, s, d, packet_bytes, DEFAULT_TTL, at)?);
        i += 1;
    }
    Ok(CbrFlow { ids })
}

/// Delivery outcome of a scheduled flow; an empty flow counts as fully
/// delivered.
pub fn cbr_outcome(engine: &Engine, flow: &CbrFlow) -> CbrResult {
    let delivered = flow
        .ids
        .iter()
        .filter(|id| engine.packet(**id).map(|p| p.status) == Some(PacketStatus::Delivered))
        .count();
    CbrResult {
        sent: flow.ids.len(),
        delivered,
        delivered_fraction: if flow.ids.is_empty() {
            1.0
        } else {
            delivered as f64 / flow.ids.len() as f64
        },
        max_queue_depth: engine.max_queue_depth(),
    }
}

/// Camera-style flow with [`DEFAULT_CBR_PACKET_BYTES`] packets, run to
/// completion. Queue depth is the peak over all links during the run.
pub fn run_cbr_flow(
    engine: &mut Engine,
    src: &str,
    dst: &str,
    rate_mbps: f64,
    duration_us: f64,
) -> Result<CbrResult, ProbeError> {
    run_cbr_flow_sized(engine, src, dst, rate_mbps, duration_us, DEFAULT_CBR_PACKET_BYTES)
}

pub fn run_cbr_flow_sized(
    engine: &mut Engine,
    src: &str,
    dst: &str,
    rate_mbps: f64,
    duration_us: f64,
    packet_bytes: u32,
) -> Result<CbrResult, ProbeError> {
    let flow = schedule_cbr_flow(engine, src, dst, rate_mbps, duration_us, packet_bytes)?;
    engine.reset_queue_stats();
    engine.run();
    Ok(cbr_outcome(engine, &flow))
}
