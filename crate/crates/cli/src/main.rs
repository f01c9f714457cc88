//! `marsim`: validate inputs, solve allocations, run sweeps and offloading simulations.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use marsim::harness;
use marsim::profile::{DeviceProfile, BUNDLED_PROFILE};
use marsim::report::{self, Format, Report};
use marsim::scenario::{Algorithm, Scenario, TraceSource};
use marsim::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "marsim",
    version,
    about = "Energy-aware configuration and offloading simulator for edge-assisted mobile AR"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a device profile and, optionally, a scenario.
    Validate(Common),
    /// Solve one LEAF allocation (first bandwidth of the scenario unless --bmax).
    Solve(Common),
    /// Run LEAF, FACT_LIKE and MINE over the scenario's bandwidth and preference sweep.
    Sweep(Common),
    /// Simulate the offloading policies over the scenario's trace.
    AioRun(Common),
    /// Write the bundled device profile.
    EmitDefaultProfile {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Device profile (TOML). Defaults to the bundled profile.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Scenario file (TOML). Defaults to the bundled scenario for the command.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutFormat,
    /// Seed of a synthetic trace source.
    #[arg(long)]
    seed: Option<u64>,
    /// Single total bandwidth, Mbps; replaces the scenario's list.
    #[arg(long)]
    bmax: Option<f64>,
    /// Latency weight for every client.
    #[arg(long)]
    lambda1: Option<f64>,
    /// Accuracy weight for every client.
    #[arg(long)]
    lambda2: Option<f64>,
    /// Single theta1/theta2 ratio; replaces the scenario's offload sweep.
    #[arg(long)]
    theta_ratio: Option<f64>,
    /// Relative convergence tolerance of the outer solver loop.
    #[arg(long)]
    tau: Option<f64>,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    clients: Vec<usize>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind, clients) = match &e {
            Error::Infeasible { clients } => (EXIT_INFEASIBLE, "infeasible", clients.clone()),
            Error::Io { .. } => (EXIT_IO, "io", Vec::new()),
            _ => (EXIT_VALIDATION, "validation", Vec::new()),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
            clients,
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        kind: "io",
        message: format!("{}: {e}", path.display()),
        clients: Vec::new(),
    }
}

fn load_profile(c: &Common) -> Result<DeviceProfile, Failure> {
    Ok(match &c.profile {
        Some(p) => DeviceProfile::load(p)?,
        None => DeviceProfile::bundled(),
    })
}

/// Scenario with command-line overrides applied; flags win over file values.
fn load_scenario(c: &Common, fallback: fn() -> Scenario) -> Result<Scenario, Failure> {
    let mut s = match &c.scenario {
        Some(p) => Scenario::load(p)?,
        None => fallback(),
    };
    if let Some(b) = c.bmax {
        s.b_max = vec![b];
    }
    if let Some(l1) = c.lambda1 {
        s.lambda1 = l1;
        s.clients.iter_mut().for_each(|k| k.lambda1 = None);
    }
    if let Some(l2) = c.lambda2 {
        s.lambda2 = l2;
        s.clients.iter_mut().for_each(|k| k.lambda2 = None);
    }
    if let Some(r) = c.theta_ratio {
        s.offload_sweep = vec![r];
    }
    if let Some(t) = c.tau {
        s.solver.tau = t;
    }
    if let (Some(seed), Some(TraceSource::Synthetic { seed: s0, .. })) = (c.seed, s.trace.as_mut())
    {
        *s0 = seed;
    }
    s.validate()?;
    Ok(s)
}

fn format_of(c: &Common) -> Format {
    match c.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_failure(Path::new("<stdout>"), e))
        }
    }
}

/// Writes the reports, then fails with the infeasible clients if any point had them.
fn emit_reports(c: &Common, reports: &[Report]) -> Result<(), Failure> {
    emit(c.out.as_deref(), &report::render(reports, format_of(c))?)?;
    let mut clients: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.infeasible_clients.iter().copied())
        .collect();
    if clients.is_empty() {
        return Ok(());
    }
    clients.sort_unstable();
    clients.dedup();
    Err(Error::Infeasible { clients }.into())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::EmitDefaultProfile { out } => emit(out.as_deref(), BUNDLED_PROFILE),
        Command::Validate(c) => {
            load_profile(&c)?;
            let scenario = match &c.scenario {
                Some(_) => Some(load_scenario(&c, Scenario::ten_client)?),
                None => None,
            };
            let summary = json!({
                "profile": "ok",
                "scenario": scenario.map(|s| json!({ "name": s.name, "clients": s.clients.len() })),
            });
            emit(c.out.as_deref(), &format!("{summary}\n"))
        }
        Command::Solve(c) => {
            let profile = load_profile(&c)?;
            let scenario = load_scenario(&c, Scenario::ten_client)?;
            let b_max = scenario.b_max[0];
            let report = harness::run_allocator(&profile, &scenario, Algorithm::Leaf, b_max, None)?;
            if let Some(a) = &report.allocation {
                let used: f64 = a.configs.iter().map(|k| k.b).sum();
                eprintln!(
                    "LEAF at {b_max} Mbps: Q = {}, bandwidth used {used:.6}, {} outer iterations, converged: {}",
                    a.q_value, a.iterations, a.converged
                );
            }
            emit_reports(&c, std::slice::from_ref(&report))
        }
        Command::Sweep(c) => {
            let profile = load_profile(&c)?;
            let scenario = load_scenario(&c, Scenario::ten_client)?;
            emit_reports(&c, &harness::run_leaf_scenario(&profile, &scenario)?)
        }
        Command::AioRun(c) => {
            let profile = load_profile(&c)?;
            let scenario = load_scenario(&c, Scenario::motion_blur)?;
            emit_reports(&c, &harness::run_aio_scenario(&profile, &scenario)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut err = json!({ "error": f.kind, "message": f.message });
            if !f.clients.is_empty() {
                err["clients"] = json!(f.clients);
            }
            eprintln!("{err}");
            ExitCode::from(f.code)
        }
    }
}
