//! `decay`: survival probabilities, effective Hamiltonians, and
//! subspace reductions from the command line.
//!
//! Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 model-file
//! error.

use clap::{Parser, Subcommand};
use decay_core::cli::{self, config::{RawConfig, RunConfig}};
use decay_core::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "decay", version, about = "time evolution of unstable quantum states")]
struct Args {
    /// Configuration file (`key = value` lines with `[section]` headers)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for grid evaluation (or env DECAY_WORKERS;
    /// default: machine parallelism)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// CSV output path (default: stdout)
    #[arg(long, global = true)]
    csv: Option<PathBuf>,

    /// SVG output path (figure commands only)
    #[arg(long, global = true)]
    svg: Option<PathBuf>,

    /// Significant digits in CSV output, 6 to 17
    #[arg(long, global = true)]
    precision: Option<usize>,

    /// Density kind: breit-wigner | linear-onset
    #[arg(long, global = true)]
    density: Option<String>,

    /// Resonance energy
    #[arg(long, global = true)]
    e0: Option<f64>,

    /// Resonance width
    #[arg(long, global = true)]
    gamma0: Option<f64>,

    /// Spectral threshold
    #[arg(long, global = true)]
    emin: Option<f64>,

    /// Linear-onset scale parameter
    #[arg(long, global = true)]
    scale: Option<f64>,

    /// Model file path
    #[arg(long, global = true)]
    model: Option<PathBuf>,

    /// Subspace state index for model-derived densities
    #[arg(long, global = true)]
    state: Option<usize>,

    /// Resolvent regularization for discrete reservoirs
    #[arg(long, global = true)]
    eta: Option<f64>,

    /// Degeneracy grouping tolerance
    #[arg(long, global = true)]
    group_tol: Option<f64>,

    /// Grid start time
    #[arg(long, global = true)]
    tmin: Option<f64>,

    /// Grid end time
    #[arg(long, global = true)]
    tmax: Option<f64>,

    /// Grid point count
    #[arg(long, global = true)]
    points: Option<usize>,

    /// Grid spacing: linear | log
    #[arg(long, global = true)]
    spacing: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival probability figure preset
    Fig1,
    /// Instantaneous-energy figure preset
    Fig2,
    /// Survival amplitude over a grid
    Survival,
    /// Scalar effective Hamiltonian over a grid
    Heff,
    /// Transition (crossover) time
    Tas,
    /// Long-time subspace reduction of a model file
    Subspace,
    /// Exact-vs-approximate effective Hamiltonian table
    ExactCompare,
}

fn build_config(args: &Args) -> decay_core::Result<RunConfig> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    let mut set = |section: &str, key: &str, value: Option<String>| {
        if let Some(v) = value {
            raw.set(section, key, &v);
        }
    };
    set("density", "kind", args.density.clone());
    set("density", "e0", args.e0.map(|v| v.to_string()));
    set("density", "gamma0", args.gamma0.map(|v| v.to_string()));
    set("density", "emin", args.emin.map(|v| v.to_string()));
    set("density", "scale", args.scale.map(|v| v.to_string()));
    set("model", "file", args.model.as_ref().map(|p| p.display().to_string()));
    set("model", "state", args.state.map(|v| v.to_string()));
    set("model", "eta", args.eta.map(|v| v.to_string()));
    set("model", "group_tol", args.group_tol.map(|v| v.to_string()));
    set("grid", "tmin", args.tmin.map(|v| v.to_string()));
    set("grid", "tmax", args.tmax.map(|v| v.to_string()));
    set("grid", "points", args.points.map(|v| v.to_string()));
    set("grid", "spacing", args.spacing.clone());
    set("output", "csv", args.csv.as_ref().map(|p| p.display().to_string()));
    set("output", "svg", args.svg.as_ref().map(|p| p.display().to_string()));
    set("output", "precision", args.precision.map(|v| v.to_string()));
    RunConfig::resolve(raw)
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::ModelFile(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let workers = args.workers.or_else(|| {
        std::env::var("DECAY_WORKERS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = workers {
        // ignore failure if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let run = || -> decay_core::Result<()> {
        let cfg = build_config(&args)?;
        match args.command {
            Command::Fig1 => cli::cmd_fig1(&cfg),
            Command::Fig2 => cli::cmd_fig2(&cfg),
            Command::Survival => cli::cmd_survival(&cfg),
            Command::Heff => cli::cmd_heff(&cfg),
            Command::Tas => cli::cmd_tas(&cfg),
            Command::Subspace => cli::cmd_subspace(&cfg),
            Command::ExactCompare => cli::cmd_exact_compare(&cfg),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("decay: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
