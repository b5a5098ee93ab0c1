use std::path::PathBuf;
use std::process::ExitCode;

use beeslab::replicas::ReplicaRunner;
use beeslab_cli::config::{parse_config, Command, Params};
use beeslab_cli::output::{OutputDir, RunStatus, MANIFEST_FILE};
use beeslab_cli::run::run_experiment;
use clap::Parser;

const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

/// Run a beeslab experiment described by a JSON config file.
#[derive(Debug, Parser)]
#[command(name = "beeslab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicas (1 runs sequentially).
    #[arg(long, env = "BEESLAB_JOBS")]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let source = match std::fs::read_to_string(&cli.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let config = match parse_config(&source, cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let root = cli
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("beeslab-out").join(config.command.name()));
    let out = match OutputDir::create(&root) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create {}: {e}", root.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Params::Sweep(p) = &config.params {
        eprintln!("sweep plan: {} cells", p.n.len() * p.drifts.len());
        let mut cell = 0;
        for n in &p.n {
            for d in p.drifts.values() {
                eprintln!("  cell {cell}: N = {n}, drift {d}");
                cell += 1;
            }
        }
    }

    let manifest = run_experiment(&config, &out, &ReplicaRunner::new(cli.jobs));
    for v in &manifest.violations {
        eprintln!("invariant violation: {v}");
    }
    for c in manifest.cells.iter().flatten().filter(|c| c.status != RunStatus::Ok) {
        eprintln!("cell {} (N = {}) failed: {}", c.cell, c.n, c.error.as_deref().unwrap_or("unknown error"));
    }
    if let Some(e) = &manifest.error {
        eprintln!("error: {e}");
    }
    eprintln!(
        "{}: {} files written to {} ({} replicas, {:.1} s); see {MANIFEST_FILE}",
        manifest.command,
        manifest.outputs.len(),
        root.display(),
        manifest.replicas.len(),
        manifest.wall_clock_seconds
    );
    match manifest.status {
        RunStatus::Ok => ExitCode::SUCCESS,
        RunStatus::InvariantViolation => ExitCode::from(EXIT_INVARIANT),
        RunStatus::Error => ExitCode::from(EXIT_RUNTIME),
    }
}
