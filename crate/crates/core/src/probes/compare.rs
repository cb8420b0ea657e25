use super::LatencyReport;

/// Per-hop incremental RTT: mean at hop k minus mean at hop k-1 (the first
/// hop's increment is its own mean).
pub fn hop_increments(r: &LatencyReport) -> Vec<f64> {
    let mut prev = 0.0;
    r.hops
        .iter()
        .map(|h| {
            let inc = h.mean_us - prev;
            prev = h.mean_us;
            inc
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedHop {
    pub node_id: String,
    pub baseline_hop: usize,
    pub variant_hop: usize,
    pub baseline_increment_us: f64,
    pub variant_increment_us: f64,
    pub delta_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AddedHop {
    pub node_id: String,
    pub variant_hop: usize,
    pub increment_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingComparison {
    pub shared: Vec<SharedHop>,
    pub added: Vec<AddedHop>,
    /// Baseline hops that the variant no longer crosses.
    pub removed: Vec<String>,
    pub baseline_end_to_end_us: f64,
    pub variant_end_to_end_us: f64,
    pub added_increment_sum_us: f64,
}

impl ScalingComparison {
    pub fn end_to_end_diff_us(&self) -> f64 {
        self.variant_end_to_end_us - self.baseline_end_to_end_us
    }

    pub fn max_abs_shared_delta_us(&self) -> f64 {
        self.shared.iter().map(|s| s.delta_us.abs()).fold(0.0, f64::max)
    }
}

/// Matches hops by node id. Shared hops compare their incremental RTTs;
/// hops only the variant has are reported with their own increments.
pub fn compare_scaling(baseline: &LatencyReport, variant: &LatencyReport) -> ScalingComparison {
    let bi = hop_increments(baseline);
    let vi = hop_increments(variant);
    let mut shared = Vec::new();
    let mut added = Vec::new();
    for (v, h) in variant.hops.iter().enumerate() {
        match baseline.hops.iter().position(|b| b.node_id == h.node_id) {
            Some(b) => shared.push(SharedHop {
                node_id: h.node_id.clone(),
                baseline_hop: b + 1,
                variant_hop: v + 1,
                baseline_increment_us: bi[b],
                variant_increment_us: vi[v],
                delta_us: vi[v] - bi[b],
            }),
            None => added.push(AddedHop {
                node_id: h.node_id.clone(),
                variant_hop: v + 1,
                increment_us: vi[v],
            }),
        }
    }
    let removed = baseline
        .hops
        .iter()
        .filter(|b| !variant.hops.iter().any(|h| h.node_id == b.node_id))
        .map(|b| b.node_id.clone())
        .collect();
    let last = |r: &LatencyReport| r.hops.last().map_or(0.0, |h| h.mean_us);
    ScalingComparison {
        added_increment_sum_us: added.iter().map(|a| a.increment_us).sum(),
        shared,
        added,
        removed,
        baseline_end_to_end_us: last(baseline),
        variant_end_to_end_us: last(variant),
    }
}
