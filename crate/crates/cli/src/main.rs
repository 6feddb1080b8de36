mod config;
mod heatmap;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use switchnet_core::analysis::{energy_of_series, entropy, entropy_of_signals, EnergyResult, EntropyResult};
use switchnet_core::harness::{run_sweep, SweepConfig};
use switchnet_core::solver::{simulate, Waveform};
use switchnet_core::topology::{generate_network, NetworkTopology};
use switchnet_core::{differential_readout, energy, Error};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) => CliError::Config(e.to_string()),
            Error::Data(_) => CliError::Io(e.to_string()),
            Error::Generation(_) | Error::Numerical { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "switchnet", version, about = "Random resistive-switch network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Use the uncentered XᵀX spectrum.
    #[arg(long)]
    no_center: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network and write topology.json.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Drive a topology and write trace.csv and summary.json.
    Simulate {
        #[arg(long)]
        topology: PathBuf,
        /// Sine amplitude in volts (overrides the config waveform).
        #[arg(long)]
        amplitude: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Entropy and energy of one or more trace CSVs.
    Analyze {
        #[arg(long, required = true, num_args = 1..)]
        trace: Vec<PathBuf>,
        /// Differential readout pair of zero-based interface columns, e.g. `1,8`.
        #[arg(long, value_parser = parse_pair)]
        readout: Option<(usize, usize)>,
        #[command(flatten)]
        common: Common,
    },
    /// Single-network sweep over (alpha, beta, xi, v).
    Sweep {
        #[arg(long)]
        heatmap: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep where every cell is a hierarchy of independent networks.
    Hierarchy {
        #[arg(long)]
        heatmap: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated indices")?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.no_center {
            cfg.analysis.center = false;
        }
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_generate(common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let grid = cfg.grid.build().map_err(|e| CliError::Config(format!("grid: {e}")))?;
    let spec = cfg.generation_spec()?;
    spec.validate(&grid).map_err(|e| CliError::Config(format!("network: {e}")))?;
    let topo = generate_network(&grid, &spec, cfg.seed)?;
    let path = out_dir(&cfg).join("topology.json");
    output::write_json(&path, &topo)?;
    println!(
        "edges: {} ({} generated, {} added)",
        topo.edges.len(),
        topo.edges.len() - topo.added_edges,
        topo.added_edges
    );
    println!("interface nodes: {}", topo.grid.interface_nodes().len());
    println!("connected: {}", topo.is_connected());
    println!("wrote {}", path.display());
    Ok(())
}

fn read_topology(path: &Path) -> Result<NetworkTopology, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let topo: NetworkTopology =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: corrupt topology: {e}", path.display())))?;
    topo.validate().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(topo)
}

#[derive(Serialize)]
struct SimSummary {
    steps: usize,
    dt: f64,
    waveform: Waveform,
    energy: EnergyResult,
    switching_events: u64,
    max_residual: f64,
}

fn cmd_simulate(topology: &Path, amplitude: Option<f64>, common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let topo = read_topology(topology)?;
    let mut waveform = cfg.waveform;
    if let Some(a) = amplitude {
        waveform = match waveform {
            Waveform::Sine { frequency, phase, .. } => Waveform::Sine { amplitude: a, frequency, phase },
            Waveform::Constant { .. } => Waveform::Constant { volts: a },
        };
    }
    cfg.sim.validate().map_err(|e| CliError::Config(format!("sim: {e}")))?;
    let trace = simulate(&topo, &waveform, &cfg.sim)?;
    let summary = SimSummary {
        steps: trace.len(),
        dt: trace.dt,
        waveform,
        energy: energy(&trace)?,
        switching_events: trace.switching_events,
        max_residual: trace.max_residual,
    };
    let dir = out_dir(&cfg);
    output::write_atomic(&dir.join("trace.csv"), &output::trace_csv(&trace)?)?;
    output::write_json(&dir.join("summary.json"), &summary)?;
    println!("rows: {}", trace.len());
    println!("energy: {} J", output::fmt_num(summary.energy.energy_joules));
    println!("switching events: {}", trace.switching_events);
    Ok(())
}

#[derive(Serialize)]
struct AnalysisSummary {
    traces: Vec<PathBuf>,
    readout: Option<(usize, usize)>,
    center: bool,
    entropy: EntropyResult,
    energy: EnergyResult,
}

fn cmd_analyze(traces: &[PathBuf], readout: Option<(usize, usize)>, common: &Common) -> Result<(), CliError> {
    let cfg = common.load()?;
    let center = cfg.analysis.center;
    let readout = readout.or(cfg.analysis.readout).or((traces.len() > 1).then_some(cfg.hierarchy.readout));
    let loaded = traces.iter().map(|p| output::read_trace_csv(p)).collect::<Result<Vec<_>, _>>()?;

    let entropy = match readout {
        None => entropy(&loaded[0].interface_matrix(), center)?,
        Some((a, b)) => {
            let signals = loaded
                .iter()
                .map(|t| differential_readout(t, a, b))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("readout: {e}")))?;
            entropy_of_signals(&signals, center)?
        }
    };
    let mut total = EnergyResult { energy_joules: 0.0, duration: 0.0, mean_power: 0.0 };
    for t in &loaded {
        let e = energy_of_series(&t.applied_voltage, &t.source_current, t.dt)?;
        total.energy_joules += e.energy_joules;
        total.duration = total.duration.max(e.duration);
    }
    if total.duration > 0.0 {
        total.mean_power = total.energy_joules / total.duration;
    }
    let summary = AnalysisSummary { traces: traces.to_vec(), readout, center, entropy, energy: total };
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?);
    if let Some(dir) = &cfg.out {
        output::write_json(&dir.join("analysis.json"), &summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    workers: usize,
    config: &'a SweepConfig,
    records: usize,
    failed: usize,
    seeds: Vec<u64>,
}

fn cmd_sweep(common: &Common, heatmap: bool, hierarchy: bool) -> Result<(), CliError> {
    let cfg = common.load()?;
    let sweep = cfg.sweep_config(common.seed, common.no_center, hierarchy);
    sweep.validate().map_err(|e| CliError::Config(format!("sweep: {e}")))?;
    let outcome = run_sweep(&sweep, cfg.workers)?;
    let dir = out_dir(&cfg);

    output::write_atomic(&dir.join("records.csv"), &output::records_csv(&outcome.records)?)?;
    output::write_atomic(&dir.join("aggregate.csv"), &output::aggregate_csv(&outcome.aggregates)?)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: if hierarchy { "hierarchy" } else { "sweep" },
        workers: cfg.workers,
        config: &sweep,
        records: outcome.records.len(),
        failed: outcome.failed(),
        seeds: outcome.records.iter().map(|r| r.seed).collect(),
    };
    output::write_json(&dir.join("manifest.json"), &manifest)?;

    if heatmap {
        match heatmap::render_all(&dir, &outcome.aggregates, &sweep.alphas, &sweep.betas, &sweep.xis, &sweep.amplitudes)
        {
            Ok(files) => println!("heatmaps: {}", files.len()),
            Err(e) => log::warn!("heatmap rendering failed: {e}"),
        }
    }
    println!("records: {} ({} failed)", outcome.records.len(), outcome.failed());
    if outcome.failed() == outcome.records.len() {
        let first = outcome.records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(CliError::Numerical(format!("every cell failed; first error: {first}")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { common } => cmd_generate(common),
        Command::Simulate { topology, amplitude, common } => cmd_simulate(topology, *amplitude, common),
        Command::Analyze { trace, readout, common } => cmd_analyze(trace, *readout, common),
        Command::Sweep { heatmap, common } => cmd_sweep(common, *heatmap, false),
        Command::Hierarchy { heatmap, common } => cmd_sweep(common, *heatmap, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("switchnet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
