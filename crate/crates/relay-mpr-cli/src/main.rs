//! `relay-mpr`: analytical evaluation, simulation and parameter sweeps for
//! the relay-assisted random-access network model.
//!
//! Exit codes: 0 success, 2 configuration error, 3 every grid point
//! unstable, 4 i/o error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use relay_mpr_cli::config::{parse_config, Mode};
use relay_mpr_cli::experiment::{render_csv, run_experiment, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Summary,
}

/// Relay-assisted random access with multi-packet reception: closed-form
/// queue/throughput analysis, slot-level simulation, sweeps and presets.
#[derive(Parser, Debug)]
#[command(name = "relay-mpr", version, about)]
struct Args {
    /// Experiment configuration file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,

    /// Where to write the CSV (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,

    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the configured slot count per replication.
    #[arg(long)]
    slots: Option<u64>,

    /// Override the configured number of replications.
    #[arg(long)]
    replications: Option<u32>,

    /// csv: emit the result table; summary: only the human-readable digest.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn main() -> ExitCode {
    let args = Args::parse();

    let mut config = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.sim.seed = seed;
    }
    if let Some(slots) = args.slots {
        if slots == 0 {
            eprintln!("config error: --slots must be positive");
            return ExitCode::from(2);
        }
        config.sim.slots = slots;
    }
    if let Some(replications) = args.replications {
        if replications == 0 {
            eprintln!("config error: --replications must be positive");
            return ExitCode::from(2);
        }
        config.sim.replications = replications;
    }

    for warning in config
        .scenario
        .geometry(config.scenario.n.unwrap_or(1), config.scenario.gamma.unwrap_or(0.5))
        .build()
        .map(|g| g.warnings())
        .unwrap_or_default()
    {
        eprintln!("warning: {warning}");
    }

    let output = match run_experiment(&config) {
        Ok(out) => out,
        Err(RunError::Io(e)) => {
            eprintln!("i/o error: {e}");
            return ExitCode::from(4);
        }
        Err(RunError::Model(e)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };

    match args.format {
        Format::Csv => {
            let csv = render_csv(&output);
            match &args.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, csv) {
                        eprintln!("i/o error: cannot write {}: {e}", path.display());
                        return ExitCode::from(4);
                    }
                    eprint!("{}", output.summary);
                }
                None => print!("{csv}"),
            }
        }
        Format::Summary => print!("{}", output.summary),
    }

    if output.unstable_everywhere && config.mode != Mode::Simulate {
        eprintln!("no stable grid point; see the q0min column for the stability boundary");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
