//! `meanfield`: simulate, analyse and verify mean-field spin and rotator
//! systems from the command line or a JSON config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{
    AnalyzeConfig, EnsembleConfig, LimitSdeConfig, MckeanVlasovConfig, RunConfig, SimulateCwConfig,
    SimulateKuramotoConfig, VerifyConfig,
};
use output::RunOutput;

#[derive(Parser)]
#[command(name = "meanfield", version, about)]
struct Cli {
    /// Worker threads for replica ensembles (MEANFIELD_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Glauber dynamics of the random Curie-Weiss model.
    SimulateCw(SimulateCwConfig),
    /// Euler–Maruyama simulation of the random Kuramoto model.
    SimulateKuramoto(SimulateKuramotoConfig),
    /// Integrate the limiting profile equation.
    MckeanVlasov(MckeanVlasovConfig),
    /// Critical parameters, stationary states and spectra.
    Analyze(AnalyzeConfig),
    /// Sample paths of a limiting diffusion.
    LimitSde(LimitSdeConfig),
    /// Run a named verification experiment.
    Verify(VerifyConfig),
    /// Replica ensemble reduced to mean and variance per time.
    Ensemble {
        #[command(subcommand)]
        spec: EnsembleConfig,
    },
    /// Execute a JSON config file.
    Run { config: PathBuf },
    /// List the named experiments.
    Experiments,
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("MEANFIELD_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("MEANFIELD_THREADS must be a positive integer, got `{v}`"))?;
            Ok(Some(n))
        }
        Err(_) => Ok(flag),
    }
}

/// `Ok(false)` when a verification check failed.
fn execute(config: RunConfig) -> Result<bool> {
    let mut out = RunOutput::create(config.output_dir(), config.name(), &config)?;
    let passed = match &config {
        RunConfig::SimulateCw(c) => {
            let reps = commands::simulate::cw_replicas(c)?;
            commands::simulate::simulate(&mut out, reps, c.layout)?;
            true
        }
        RunConfig::SimulateKuramoto(c) => {
            let reps = commands::simulate::kuramoto_replicas(c)?;
            commands::simulate::simulate(&mut out, reps, c.layout)?;
            true
        }
        RunConfig::MckeanVlasov(c) => {
            commands::analyze::mckean_vlasov(&mut out, c)?;
            true
        }
        RunConfig::Analyze(c) => {
            commands::analyze::analyze(&mut out, c)?;
            true
        }
        RunConfig::LimitSde(c) => {
            commands::limit::limit_sde(&mut out, c)?;
            true
        }
        RunConfig::Verify(c) => commands::verify::verify(&mut out, c)?,
        RunConfig::Ensemble { spec } => {
            commands::simulate::ensemble(&mut out, spec)?;
            true
        }
    };
    let dir = out.finish()?;
    eprintln!("wrote {}", dir.display());
    Ok(passed)
}

fn load(path: &PathBuf) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn main_inner(cli: Cli) -> Result<bool> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let config = match cli.command {
        Command::SimulateCw(c) => RunConfig::SimulateCw(c),
        Command::SimulateKuramoto(c) => RunConfig::SimulateKuramoto(c),
        Command::MckeanVlasov(c) => RunConfig::MckeanVlasov(c),
        Command::Analyze(c) => RunConfig::Analyze(c),
        Command::LimitSde(c) => RunConfig::LimitSde(c),
        Command::Verify(c) => RunConfig::Verify(c),
        Command::Ensemble { spec } => RunConfig::Ensemble { spec },
        Command::Run { config } => load(&config)?,
        Command::Experiments => {
            for name in meanfield::experiments::EXPERIMENT_NAMES {
                println!("{name}");
            }
            return Ok(true);
        }
    };
    execute(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
