//! JSON scenario documents.
//!
//! ```json
//! { "nodes": [{"id": "A1-S1", "kind": "GatewayServer", "rack": "A1", "cell": "A",
//!              "processing_delay_us": 10.0}],
//!   "links": [{"id": "A1-SW~A1-S1", "a": "A1-SW", "b": "A1-S1", "length_km": 0.0,
//!              "rate_gbps": 10.0, "medium": "Copper"}],
//!   "interconnect_mode": "Tdm", "seed": 2019,
//!   "probe": {"iterations": 10, "probes_per_run": 150, "probe_size_bytes": 64,
//!             "inter_probe_gap_us": 1000.0},
//!   "jitter": {"kind": "Uniform", "half_width_us": 30.0} }
//! ```
//!
//! Unknown keys anywhere in the document are a parse error.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate_topology, InterconnectMode, Link, Medium, Node, NodeKind, TopoError, Topology,
    Violation,
};
use crate::probes::ProbeConfig;
use crate::simcore::JitterModel;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid topology: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A complete, self-contained simulation input.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: Topology,
    pub seed: u64,
    pub probe: ProbeConfig,
    pub jitter: JitterModel,
}

impl ScenarioConfig {
    /// First and last server by id: the traceroute endpoints used for the
    /// published measurements.
    pub fn default_endpoints(&self) -> Option<(String, String)> {
        let first = self.topology.servers().next()?;
        let last = self.topology.servers().last()?;
        Some((first.id.clone(), last.id.clone()))
    }

    pub fn to_json(&self) -> String {
        let doc = ScenarioDoc::from(self);
        let mut s = serde_json::to_string_pretty(&doc).expect("scenario serialises");
        s.push('\n');
        s
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
    interconnect_mode: InterconnectMode,
    seed: u64,
    probe: ProbeConfig,
    jitter: JitterModel,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    kind: NodeKind,
    #[serde(default)]
    rack: Option<String>,
    #[serde(default)]
    cell: Option<String>,
    processing_delay_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wavelengths: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    id: String,
    a: String,
    b: String,
    length_km: f64,
    rate_gbps: f64,
    medium: Medium,
}

impl From<&ScenarioConfig> for ScenarioDoc {
    fn from(c: &ScenarioConfig) -> Self {
        ScenarioDoc {
            nodes: c
                .topology
                .nodes()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    kind: n.kind(),
                    rack: n.rack_id.clone(),
                    cell: n.cell_id.clone(),
                    processing_delay_us: n.processing_delay_us,
                    wavelengths: n.wavelengths,
                })
                .collect(),
            links: c
                .topology
                .links()
                .map(|l| LinkDoc {
                    id: l.id.clone(),
                    a: l.a.clone(),
                    b: l.b.clone(),
                    length_km: l.length_km,
                    rate_gbps: l.rate_gbps,
                    medium: l.medium,
                })
                .collect(),
            interconnect_mode: c.topology.interconnect_mode,
            seed: c.seed,
            probe: c.probe,
            jitter: c.jitter,
        }
    }
}

/// Parses and validates a scenario document held in memory.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut violations = Vec::new();
    let mut t = Topology::new(doc.interconnect_mode);
    for n in doc.nodes {
        let node = Node {
            id: n.id,
            kind: n.kind,
            rack_id: n.rack,
            cell_id: n.cell,
            processing_delay_us: n.processing_delay_us,
            wavelengths: n.wavelengths,
        };
        if let Err(TopoError::DuplicateNode(id)) = t.add_node(node) {
            violations.push(Violation::DuplicateId { id });
        }
    }
    for l in doc.links {
        let link = Link::new(l.id, l.a, l.b, l.length_km, l.rate_gbps, l.medium);
        if let Err(TopoError::DuplicateLink(id)) = t.add_link(link) {
            violations.push(Violation::DuplicateId { id });
        }
    }
    violations.extend(validate_topology(&t));
    if !violations.is_empty() {
        return Err(ScenarioError::Validation(violations));
    }
    doc.probe.check().map_err(ScenarioError::InvalidConfig)?;
    doc.jitter.check().map_err(ScenarioError::InvalidConfig)?;

    Ok(ScenarioConfig {
        topology: t,
        seed: doc.seed,
        probe: doc.probe,
        jitter: doc.jitter,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn save_scenario(c: &ScenarioConfig, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, c.to_json()).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}
