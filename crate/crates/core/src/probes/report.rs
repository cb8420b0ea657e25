use std::collections::BTreeMap;
use std::io;

use super::{hop_increments, LatencyReport, ProbeError, ScalingComparison};

fn writer<W: io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn us(v: f64) -> String {
    format!("{v:.3}")
}

fn csv_err(e: impl ToString) -> ProbeError {
    ProbeError::Csv(e.to_string())
}

/// One row per answered probe: iteration, probe_index, hop_index, node_id,
/// rtt_us.
pub fn write_probe_csv<W: io::Write>(r: &LatencyReport, w: W) -> Result<(), ProbeError> {
    let mut wr = writer(w);
    wr.write_record(["iteration", "probe_index", "hop_index", "node_id", "rtt_us"])
        .map_err(csv_err)?;
    for s in &r.samples {
        wr.write_record([
            s.iteration.to_string(),
            s.probe_index.to_string(),
            s.hop_index.to_string(),
            s.node_id.clone(),
            us(s.rtt_us),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn write_aggregate_csv<W: io::Write>(r: &LatencyReport, w: W) -> Result<(), ProbeError> {
    let mut wr = writer(w);
    wr.write_record(["hop_index", "node_id", "mean_us", "min_us", "max_us", "samples"])
        .map_err(csv_err)?;
    for h in &r.hops {
        wr.write_record([
            h.hop_index.to_string(),
            h.node_id.clone(),
            us(h.mean_us),
            us(h.min_us),
            us(h.max_us),
            h.samples.len().to_string(),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig6Row {
    pub iteration: u32,
    pub hop_index: usize,
    pub node_id: String,
    pub mean_us: f64,
}

/// Per-iteration, per-hop mean RTT: one series per iteration.
pub fn fig6_rows(r: &LatencyReport) -> Vec<Fig6Row> {
    let mut acc: BTreeMap<(u32, usize), (f64, usize)> = BTreeMap::new();
    for s in &r.samples {
        let e = acc.entry((s.iteration, s.hop_index)).or_default();
        e.0 += s.rtt_us;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((iteration, hop_index), (sum, n))| Fig6Row {
            iteration,
            hop_index,
            node_id: r.hops[hop_index - 1].node_id.clone(),
            mean_us: sum / n as f64,
        })
        .collect()
}

pub fn write_fig6_csv<W: io::Write>(r: &LatencyReport, w: W) -> Result<(), ProbeError> {
    let mut wr = writer(w);
    wr.write_record(["iteration", "hop_index", "node_id", "mean_us"])
        .map_err(csv_err)?;
    for row in fig6_rows(r) {
        wr.write_record([
            row.iteration.to_string(),
            row.hop_index.to_string(),
            row.node_id,
            us(row.mean_us),
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

pub fn write_fig7_csv<W: io::Write>(r: &LatencyReport, w: W) -> Result<(), ProbeError> {
    let mut wr = writer(w);
    wr.write_record(["hop_index", "node_id", "mean_us", "increment_us"])
        .map_err(csv_err)?;
    for (h, inc) in r.hops.iter().zip(hop_increments(r)) {
        wr.write_record([h.hop_index.to_string(), h.node_id.clone(), us(h.mean_us), us(inc)])
            .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

/// One row per variant hop; baseline columns are empty for added hops.
pub fn write_compare_csv<W: io::Write>(c: &ScalingComparison, w: W) -> Result<(), ProbeError> {
    let mut wr = writer(w);
    wr.write_record([
        "node_id",
        "variant_hop",
        "baseline_hop",
        "variant_increment_us",
        "baseline_increment_us",
        "delta_us",
    ])
    .map_err(csv_err)?;
    let mut rows: Vec<(usize, [String; 6])> = c
        .shared
        .iter()
        .map(|s| {
            (
                s.variant_hop,
                [
                    s.node_id.clone(),
                    s.variant_hop.to_string(),
                    s.baseline_hop.to_string(),
                    us(s.variant_increment_us),
                    us(s.baseline_increment_us),
                    us(s.delta_us),
                ],
            )
        })
        .collect();
    rows.extend(c.added.iter().map(|a| {
        (
            a.variant_hop,
            [
                a.node_id.clone(),
                a.variant_hop.to_string(),
                String::new(),
                us(a.increment_us),
                String::new(),
                String::new(),
            ],
        )
    }));
    rows.sort_by_key(|(k, _)| *k);
    for (_, r) in rows {
        wr.write_record(r).map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

/// metric,value summary of a comparison.
pub fn write_compare_summary_csv<W: io::Write>(c: &ScalingComparison, w: W) -> Result<(), ProbeError> {
    let mut wr = writer(w);
    let rows = [
        ("shared_hops", c.shared.len().to_string()),
        ("added_hops", c.added.len().to_string()),
        ("removed_hops", c.removed.len().to_string()),
        ("max_abs_shared_delta_us", us(c.max_abs_shared_delta_us())),
        ("baseline_end_to_end_us", us(c.baseline_end_to_end_us)),
        ("variant_end_to_end_us", us(c.variant_end_to_end_us)),
        ("end_to_end_diff_us", us(c.end_to_end_diff_us())),
        ("added_increment_sum_us", us(c.added_increment_sum_us)),
    ];
    wr.write_record(["metric", "value"]).map_err(csv_err)?;
    for (k, v) in rows {
        wr.write_record([k, v.as_str()]).map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}
