use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use fires::channel::ChannelDump;
use fires::harness::{
    emit_results, run_sweep, write_csv, write_json, ExperimentConfig, OutputFormat, Scenario,
    SweepAxis,
};

/// Monte Carlo experiments for fluid-element transmit/reflect surfaces.
#[derive(Parser, Debug)]
#[command(name = "fires", version, about)]
struct Cli {
    /// JSON experiment configuration; missing keys take default values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true, env = "FIRES_SEED")]
    seed: Option<u64>,

    /// Number of Monte Carlo trials.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,

    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "FIRES_THREADS")]
    threads: Option<usize>,

    /// Seed one particle of every swarm with the baseline layout.
    #[arg(long, global = true)]
    inject_baseline: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sum rate versus transmit power.
    SweepPower,
    /// Sum rate versus aperture area.
    SweepArea,
    /// Mean global-best fitness per iteration.
    Convergence,
    /// One aggregate at the configured power.
    Single,
    /// Write the channel realization of one trial as JSON.
    DumpChannel {
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.n_trials = trials;
    }
    cfg.inject_baseline |= cli.inject_baseline;
    cfg.sweep = match cli.command {
        Command::SweepPower => SweepAxis::Power,
        Command::SweepArea => SweepAxis::Area,
        Command::Convergence => SweepAxis::Iterations,
        Command::Single => SweepAxis::None,
        Command::DumpChannel { trial } => return dump_channel(&cfg, trial, cli.out),
    };
    cfg.validate()?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building thread pool")?;
    log::info!(
        "sweep {:?}: {} trials, seed {}, config {}",
        cfg.sweep,
        cfg.n_trials,
        cfg.seed,
        cfg.digest()
    );
    let records = pool.install(|| run_sweep(&cfg))?;

    match &cli.out {
        Some(path) => emit_results(&records, &cfg, path, cli.format)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match cli.format {
                OutputFormat::Csv => write_csv(&records, &mut stdout)?,
                OutputFormat::Json => {
                    write_json(&cfg, &records, &mut stdout)?;
                    writeln!(stdout)?;
                }
            }
        }
    }
    Ok(())
}

fn dump_channel(cfg: &ExperimentConfig, trial: usize, out: Option<PathBuf>) -> Result<()> {
    let scenario = Scenario::new(cfg)?;
    let draw = scenario.draw(trial)?;
    let dump = ChannelDump {
        seed: cfg.seed,
        geometry: scenario.geometry().clone(),
        params: draw.params,
        realization: draw.realization,
    };
    match out {
        Some(path) => dump.save(&path)?,
        None => println!("{}", serde_json::to_string_pretty(&dump)?),
    }
    Ok(())
}
