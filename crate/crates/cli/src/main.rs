mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Packet-level simulator of a server-centric PON data-centre testbed.
///
/// SCENARIO is a JSON scenario file or one of `builtin:ref8` (the eight-hop
/// reference testbed) and `builtin:prior5` (its five-hop predecessor).
#[derive(Debug, Parser)]
#[command(name = "ponsim", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario and its address plan; prints one line per violation.
    Validate {
        scenario: String,
        /// Address plan CSV to check instead of the derived plan.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Per-hop RTT campaign between two nodes.
    Traceroute {
        scenario: String,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot data: 6 = per-iteration hop means, 7 = overall hop means and increments.
    Fig {
        scenario: String,
        #[arg(long)]
        figure: u32,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrated zero-jitter traceroutes of two scenarios, hop by hop.
    Compare {
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        variant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Echo requests between two nodes.
    Ping {
        scenario: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        count: u32,
        #[arg(long, env = "SIM_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        zero_jitter: bool,
        /// Also write the engine's event trace.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Constant-bit-rate flow continuity check.
    Cbr {
        scenario: String,
        #[arg(long, default_value = "A1-CAM")]
        from: String,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        rate_mbps: f64,
        #[arg(long, default_value_t = 1_000_000.0)]
        duration_us: f64,
        #[arg(long, default_value_t = 1200)]
        packet_bytes: u32,
        #[arg(long, env = "SIM_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derived address plan as CSV.
    Plan {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Routes between every ordered pair of servers.
    Routes {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a scenario (typically a builtin) as an editable JSON file.
    Export {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Source node (default: first server by id).
    #[arg(long)]
    pub from: Option<String>,
    /// Destination node (default: last server by id).
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub iterations: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub probes: Option<u32>,
    #[arg(long, env = "SIM_SEED")]
    pub seed: Option<u64>,
    /// Disable processing jitter.
    #[arg(long)]
    pub zero_jitter: bool,
    /// Run iterations on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            ExitCode::from(e.exit_code())
        }
    }
}
