mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Experiment, Failure};

#[derive(Parser)]
#[command(name = "qspec", version, about = "Probe-qubit spectroscopy experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one frequency sweep and fit its dips
    Sweep(RunArgs),
    /// Repeat the sweep along a parameter axis
    Scan(RunArgs),
    /// Build gap maps over (m, y) and fit the phase boundary
    PhaseMap(RunArgs),
    /// Compare the simulator against its analytic oracles
    Oracle(RunArgs),
    /// Count gates and score circuit infidelity
    Resources(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment description file
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace the seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the per-point measurement shots from the config
    #[arg(long)]
    shots: Option<u64>,
    /// Worker threads for map and sweep parallelism (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Replace the depolarizing noise probability from the config
    #[arg(long)]
    noise: Option<f64>,
}

fn dispatch(cli: &Cli) -> (&RunArgs, fn(&Experiment, &Path) -> Result<(), Failure>) {
    match &cli.command {
        Command::Sweep(args) => (args, commands::sweep),
        Command::Scan(args) => (args, commands::scan),
        Command::PhaseMap(args) => (args, commands::phase_map),
        Command::Oracle(args) => (args, commands::oracle),
        Command::Resources(args) => (args, commands::resources),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (args, command) = dispatch(cli);
    if let Some(workers) = args.workers {
        if workers == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let mut experiment = config::load(&args.config)?;
    experiment.apply_overrides(args.seed, args.shots, args.noise)?;
    command(&experiment, &args.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let kind = match &failure {
                Failure::Config(_) => "config",
                Failure::Runtime(_) => "runtime",
            };
            let payload = serde_json::json!({
                "error": { "kind": kind, "message": failure.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::from(match failure {
                Failure::Config(_) => 2,
                Failure::Runtime(_) => 3,
            })
        }
    }
}
