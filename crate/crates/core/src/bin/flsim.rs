// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: runs one experiment and writes CSV data files
//! plus a JSON metadata sidecar.
//!
//! Exit codes: 0 success, 1 invalid configuration or usage, 2 numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use flsim::experiment::{
    experiment_catalog, run_experiment_to_dir, ExperimentConfig, ExperimentKind, PulseSelect,
};

#[derive(Parser, Debug)]
#[command(
    name = "flsim",
    version,
    about = "Dissipative Floquet-Lindblad simulator for GHZ/W interconversion in Rydberg arrays",
    after_help = experiments_help()
)]
struct Cli {
    /// Experiment to run (see the list below).
    experiment: String,

    /// JSON configuration file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV files and the metadata sidecar.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for sweeps and seed batches
    /// (falls back to FLSIM_THREADS, then to the core count).
    #[arg(long)]
    threads: Option<usize>,

    /// Use the full blockade-structured Hamiltonians instead of the
    /// effective operators.
    #[arg(long)]
    full_hamiltonian: bool,

    /// Weak-drive pulse shape.
    #[arg(long, value_parser = ["rect", "gauss"])]
    pulse: Option<String>,
}

fn experiments_help() -> String {
    let mut s = String::from("Experiments:\n");
    for (name, desc) in experiment_catalog() {
        s.push_str(&format!("  {name:<22} {desc}\n"));
    }
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap treats --help/--version as errors that print and exit 0
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let Some(kind) = ExperimentKind::parse(&cli.experiment) else {
        eprintln!("error: unknown experiment '{}'\n\n{}", cli.experiment, experiments_help());
        return ExitCode::from(1);
    };

    let threads = cli
        .threads
        .or_else(|| std::env::var("FLSIM_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: could not configure {n} worker threads: {e}");
        }
    }

    let mut config = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match ExperimentConfig::from_json(&text) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            },
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(1);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.full_hamiltonian {
        config.full_hamiltonian = true;
    }
    match cli.pulse.as_deref() {
        Some("gauss") => config.pulse = PulseSelect::Gauss,
        Some("rect") => config.pulse = PulseSelect::Rect,
        _ => {}
    }

    match run_experiment_to_dir(kind, &config, &cli.out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
