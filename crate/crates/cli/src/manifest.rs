use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Everything needed to re-run a command and get the same bytes back.
/// `command` is the normalised argument list without `--out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub scenario: String,
    pub seed: u64,
    pub command: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub started_at: String,
}

impl RunManifest {
    pub fn new(scenario: String, seed: u64, command: Vec<String>, outputs: Vec<String>, started_at: String) -> Self {
        RunManifest {
            scenario,
            seed,
            command,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        fs::write(dir.join(MANIFEST_FILE), s)
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad manifest {}: {e}", path.display()))
    }
}
