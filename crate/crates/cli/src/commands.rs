use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::Parser;
use thiserror::Error;

use ponsim::addressing::{derive_address_plan, read_plan_csv, validate_plan, write_plan_csv};
use ponsim::probes::{
    calibrate_processing_delays, compare_scaling, ping, run_cbr_flow_sized, scenario_traceroute,
    write_aggregate_csv, write_compare_csv, write_compare_summary_csv, write_fig6_csv, write_fig7_csv,
    write_probe_csv, CalibrationTargets, LatencyReport,
};
use ponsim::routing::{compute_tables, route, write_routes_csv};
use ponsim::simcore::{DelayConstants, Engine, JitterModel, SimOptions};
use ponsim::topo::{build_prior_testbed, build_reference_testbed, load_scenario, save_scenario, ScenarioConfig, ScenarioError};
use ponsim::Execution;

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{Cli, Command, RunArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Domain(String),
    #[error("{} violation(s)", .0.len())]
    Violations(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Domain(_) | CliError::Violations(_) => 1,
        }
    }

    pub fn report(&self) {
        match self {
            CliError::Violations(v) => {
                for line in v {
                    println!("{line}");
                }
            }
            other => eprintln!("error: {other}"),
        }
    }
}

fn domain(e: impl ToString) -> CliError {
    CliError::Domain(e.to_string())
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Validate { scenario, plan } => validate(&scenario, plan.as_deref()),
        Command::Traceroute { scenario, run, out } => traceroute(&scenario, &run, &out),
        Command::Fig {
            scenario,
            figure,
            run,
            out,
        } => fig(&scenario, figure, &run, &out),
        Command::Compare { baseline, variant, out } => compare(&baseline, &variant, &out),
        Command::Ping {
            scenario,
            from,
            to,
            count,
            seed,
            zero_jitter,
            trace,
            out,
        } => ping_cmd(&scenario, from, to, count, seed, zero_jitter, trace, &out),
        Command::Cbr {
            scenario,
            from,
            to,
            rate_mbps,
            duration_us,
            packet_bytes,
            seed,
            out,
        } => cbr(&scenario, &from, to, rate_mbps, duration_us, packet_bytes, seed, &out),
        Command::Plan { scenario, out } => plan(&scenario, &out),
        Command::Routes { scenario, out } => routes(&scenario, &out),
        Command::Export { scenario, out } => {
            let s = load(&scenario)?;
            save_scenario(&s, &out).map_err(domain)
        }
        Command::Replay { manifest, out } => replay(&manifest, &out),
    }
}

fn load(arg: &str) -> Result<ScenarioConfig, CliError> {
    match arg {
        "builtin:ref8" => Ok(build_reference_testbed()),
        "builtin:prior5" => Ok(build_prior_testbed()),
        b if b.starts_with("builtin:") => Err(CliError::Usage(format!(
            "unknown builtin scenario `{b}` (known: builtin:ref8, builtin:prior5)"
        ))),
        path => load_scenario(path).map_err(|e| match e {
            ScenarioError::Validation(v) => CliError::Violations(v.iter().map(|x| x.to_string()).collect()),
            ScenarioError::InvalidConfig(m) => CliError::Domain(m),
            other => CliError::Parse(other.to_string()),
        }),
    }
}

/// How the scenario is named in a manifest: builtins verbatim, files by
/// absolute path so a replay works from any directory.
fn scenario_label(arg: &str) -> String {
    if arg.starts_with("builtin:") {
        return arg.to_string();
    }
    fs::canonicalize(arg)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| arg.to_string())
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| domain(format!("cannot create {}: {e}", dir.display())))
}

fn write_file<F, E>(dir: &Path, name: &str, f: F) -> Result<String, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), E>,
    E: ToString,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| domain(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(domain)?;
    w.flush().map_err(|e| domain(format!("cannot write {}: {e}", path.display())))?;
    Ok(name.to_string())
}

fn write_manifest(
    dir: &Path,
    scenario: &str,
    seed: u64,
    command: Vec<String>,
    outputs: Vec<String>,
    started_at: String,
) -> Result<(), CliError> {
    RunManifest::new(scenario.to_string(), seed, command, outputs, started_at)
        .write(dir)
        .map_err(|e| domain(format!("cannot write manifest: {e}")))
}

fn endpoints(s: &ScenarioConfig, from: Option<String>, to: Option<String>) -> Result<(String, String), CliError> {
    let (a, b) = s
        .default_endpoints()
        .ok_or_else(|| domain("scenario has no servers"))?;
    let (a, b) = (from.unwrap_or(a), to.unwrap_or(b));
    for id in [&a, &b] {
        if s.topology.node(id).is_none() {
            return Err(domain(format!("unknown node {id}")));
        }
    }
    Ok((a, b))
}

fn validate(scenario: &str, plan: Option<&Path>) -> Result<(), CliError> {
    let s = load(scenario)?;
    let p = match plan {
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
            read_plan_csv(&s.topology, f).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        }
        None => derive_address_plan(&s.topology).map_err(|e| CliError::Violations(vec![e.to_string()]))?,
    };
    let v = validate_plan(&p, &s.topology);
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violations(v.iter().map(|x| x.to_string()).collect()))
    }
}

struct Campaign {
    scenario: ScenarioConfig,
    report: LatencyReport,
    args: Vec<String>,
}

fn campaign(sub: &str, scenario: &str, run: &RunArgs) -> Result<Campaign, CliError> {
    let mut s = load(scenario)?;
    if let Some(seed) = run.seed {
        s.seed = seed;
    }
    if let Some(n) = run.iterations {
        s.probe.iterations = n;
    }
    if let Some(n) = run.probes {
        s.probe.probes_per_run = n;
    }
    if run.zero_jitter {
        s.jitter = JitterModel::none();
    }
    let (a, b) = endpoints(&s, run.from.clone(), run.to.clone())?;
    let exec = if run.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let report = scenario_traceroute(&s, &a, &b, exec).map_err(domain)?;
    if a != b && report.hops.is_empty() {
        return Err(domain(format!("no route from {a} to {b}")));
    }
    let mut args = vec![
        sub.to_string(),
        scenario_label(scenario),
        "--from".into(),
        a,
        "--to".into(),
        b,
        "--iterations".into(),
        s.probe.iterations.to_string(),
        "--probes".into(),
        s.probe.probes_per_run.to_string(),
        "--seed".into(),
        s.seed.to_string(),
    ];
    if run.zero_jitter {
        args.push("--zero-jitter".into());
    }
    Ok(Campaign {
        scenario: s,
        report,
        args,
    })
}

fn traceroute(scenario: &str, run: &RunArgs, out: &Path) -> Result<(), CliError> {
    let started = now();
    let c = campaign("traceroute", scenario, run)?;
    out_dir(out)?;
    let outputs = vec![
        write_file(out, "probes.csv", |w| write_probe_csv(&c.report, w))?,
        write_file(out, "aggregate.csv", |w| write_aggregate_csv(&c.report, w))?,
    ];
    write_manifest(out, &c.args[1].clone(), c.scenario.seed, c.args, outputs, started)
}

fn fig(scenario: &str, figure: u32, run: &RunArgs, out: &Path) -> Result<(), CliError> {
    if figure != 6 && figure != 7 {
        return Err(domain(format!("unknown figure {figure} (known: 6, 7)")));
    }
    let started = now();
    let mut c = campaign("fig", scenario, run)?;
    out_dir(out)?;
    let name = format!("fig{figure}.csv");
    let output = if figure == 6 {
        write_file(out, &name, |w| write_fig6_csv(&c.report, w))?
    } else {
        write_file(out, &name, |w| write_fig7_csv(&c.report, w))?
    };
    c.args.splice(2..2, ["--figure".to_string(), figure.to_string()]);
    write_manifest(out, &c.args[1].clone(), c.scenario.seed, c.args, vec![output], started)
}

/// Calibrates to the default targets and traces the default endpoints with
/// jitter off.
fn calibrated_report(arg: &str) -> Result<(ScenarioConfig, LatencyReport), CliError> {
    let mut s = load(arg)?;
    s.jitter = JitterModel::none();
    let (a, b) = endpoints(&s, None, None)?;
    let cal = calibrate_processing_delays(
        &s.topology,
        &a,
        &b,
        &CalibrationTargets::default(),
        &DelayConstants::default(),
        s.probe.probe_size_bytes,
    )
    .map_err(|e| domain(format!("{arg}: calibration failed: {e}")))?;
    cal.apply(&mut s.topology).map_err(domain)?;
    let r = scenario_traceroute(&s, &a, &b, Execution::Parallel).map_err(domain)?;
    Ok((s, r))
}

fn compare(baseline: &str, variant: &str, out: &Path) -> Result<(), CliError> {
    let started = now();
    let (_, rb) = calibrated_report(baseline)?;
    let (sv, rv) = calibrated_report(variant)?;
    let cmp = compare_scaling(&rb, &rv);
    if cmp.shared.is_empty() {
        return Err(domain("baseline and variant paths share no hops"));
    }
    out_dir(out)?;
    let outputs = vec![
        write_file(out, "compare.csv", |w| write_compare_csv(&cmp, w))?,
        write_file(out, "compare_summary.csv", |w| write_compare_summary_csv(&cmp, w))?,
    ];
    let args = vec![
        "compare".to_string(),
        "--baseline".into(),
        scenario_label(baseline),
        "--variant".into(),
        scenario_label(variant),
    ];
    write_manifest(out, &scenario_label(variant), sv.seed, args, outputs, started)
}

#[allow(clippy::too_many_arguments)]
fn ping_cmd(
    scenario: &str,
    from: Option<String>,
    to: Option<String>,
    count: u32,
    seed: Option<u64>,
    zero_jitter: bool,
    trace: bool,
    out: &Path,
) -> Result<(), CliError> {
    let started = now();
    let mut s = load(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if zero_jitter {
        s.jitter = JitterModel::none();
    }
    let (a, b) = endpoints(&s, from, to)?;
    let opts = SimOptions {
        jitter: s.jitter,
        seed: s.seed,
        trace,
        ..SimOptions::default()
    };
    let mut e = Engine::new(&s.topology, &compute_tables(&s.topology), opts).map_err(domain)?;
    let r = ping(&mut e, &a, &b, count as usize, &s.probe).map_err(domain)?;
    if !e.conservation().holds() {
        return Err(domain("packet conservation violated"));
    }
    out_dir(out)?;
    let mut outputs = vec![write_file(out, "ping.csv", |w| {
        writeln!(w, "probe_index,rtt_us")?;
        for (i, rtt) in r.rtts.iter().enumerate() {
            match rtt {
                Some(v) => writeln!(w, "{i},{v:.3}")?,
                None => writeln!(w, "{i},")?,
            }
        }
        std::io::Result::Ok(())
    })?];
    outputs.push(write_file(out, "ping_summary.csv", |w| {
        writeln!(w, "metric,value")?;
        writeln!(w, "sent,{}", r.sent)?;
        writeln!(w, "received,{}", r.received)?;
        writeln!(w, "loss_fraction,{:.6}", r.loss_fraction)?;
        if let Some(st) = r.rtt {
            writeln!(w, "mean_us,{:.3}", st.mean_us)?;
            writeln!(w, "min_us,{:.3}", st.min_us)?;
            writeln!(w, "max_us,{:.3}", st.max_us)?;
        }
        std::io::Result::Ok(())
    })?);
    if trace {
        outputs.push(write_file(out, "trace.csv", |w| e.write_trace_csv(w))?);
    }
    let mut args = vec![
        "ping".to_string(),
        scenario_label(scenario),
        "--from".into(),
        a,
        "--to".into(),
        b,
        "--count".into(),
        count.to_string(),
        "--seed".into(),
        s.seed.to_string(),
    ];
    if zero_jitter {
        args.push("--zero-jitter".into());
    }
    if trace {
        args.push("--trace".into());
    }
    write_manifest(out, &args[1], s.seed, args.clone(), outputs, started)
}

#[allow(clippy::too_many_arguments)]
fn cbr(
    scenario: &str,
    from: &str,
    to: Option<String>,
    rate_mbps: f64,
    duration_us: f64,
    packet_bytes: u32,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), CliError> {
    let started = now();
    let mut s = load(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let (a, b) = endpoints(&s, Some(from.to_string()), to)?;
    let mut e = Engine::from_scenario(&s).map_err(domain)?;
    let r = run_cbr_flow_sized(&mut e, &a, &b, rate_mbps, duration_us, packet_bytes).map_err(domain)?;
    out_dir(out)?;
    let outputs = vec![write_file(out, "cbr.csv", |w| {
        writeln!(w, "metric,value")?;
        writeln!(w, "sent,{}", r.sent)?;
        writeln!(w, "delivered,{}", r.delivered)?;
        writeln!(w, "delivered_fraction,{:.6}", r.delivered_fraction)?;
        writeln!(w, "max_queue_depth,{}", r.max_queue_depth)?;
        std::io::Result::Ok(())
    })?];
    let args = vec![
        "cbr".to_string(),
        scenario_label(scenario),
        "--from".into(),
        a,
        "--to".into(),
        b,
        "--rate-mbps".into(),
        rate_mbps.to_string(),
        "--duration-us".into(),
        duration_us.to_string(),
        "--packet-bytes".into(),
        packet_bytes.to_string(),
        "--seed".into(),
        s.seed.to_string(),
    ];
    write_manifest(out, &args[1], s.seed, args.clone(), outputs, started)
}

fn plan(scenario: &str, out: &Path) -> Result<(), CliError> {
    let started = now();
    let s = load(scenario)?;
    let p = derive_address_plan(&s.topology).map_err(domain)?;
    out_dir(out)?;
    let outputs = vec![write_file(out, "plan.csv", |w| write_plan_csv(&p, &s.topology, w))?];
    let args = vec!["plan".to_string(), scenario_label(scenario)];
    write_manifest(out, &args[1], s.seed, args.clone(), outputs, started)
}

fn routes(scenario: &str, out: &Path) -> Result<(), CliError> {
    let started = now();
    let s = load(scenario)?;
    let tables = compute_tables(&s.topology);
    let servers: Vec<&str> = s.topology.servers().map(|n| n.id.as_str()).collect();
    let mut all = Vec::new();
    for a in &servers {
        for b in &servers {
            if a != b {
                all.push(route(&tables, &s.topology, a, b).map_err(domain)?);
            }
        }
    }
    out_dir(out)?;
    let outputs = vec![write_file(out, "routes.csv", |w| write_routes_csv(&all, w))?];
    let args = vec!["routes".to_string(), scenario_label(scenario)];
    write_manifest(out, &args[1], s.seed, args.clone(), outputs, started)
}

fn replay(manifest: &Path, out: &Path) -> Result<(), CliError> {
    let m = RunManifest::read(manifest).map_err(CliError::Parse)?;
    let argv = std::iter::once("ponsim".to_string())
        .chain(m.command.iter().cloned())
        .chain(["--out".to_string(), out.display().to_string()]);
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Parse(format!("manifest command: {e}")))?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(CliError::Usage("a manifest cannot replay another replay".into()));
    }
    run(cli.command)?;
    let original: PathBuf = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut differs = Vec::new();
    for name in &m.outputs {
        let a = fs::read(original.join(name)).map_err(|e| domain(format!("{name}: {e}")))?;
        let b = fs::read(out.join(name)).map_err(|e| domain(format!("{name}: {e}")))?;
        if a == b {
            println!("identical {name}");
        } else {
            println!("differs {name}");
            differs.push(name.clone());
        }
    }
    if !differs.is_empty() {
        return Err(domain(format!("replay differs from {}", original.join(MANIFEST_FILE).display())));
    }
    Ok(())
}
