use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use phasefield_core::experiments::{
    apply_env_override, cmd_eoc, cmd_list, cmd_run, eoc_csv, parse_config, BenchmarkId, RunConfig,
};
use phasefield_core::SchemeId;

/// Batch driver for the multiphase Cahn-Hilliard solver.
#[derive(Parser)]
#[command(name = "phasefield", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark and write diagnostics and field snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Benchmark name, overriding the configuration file.
        #[arg(long)]
        benchmark: Option<String>,
        /// TD1, NTD1, NTC2 or NCOMP.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time-convergence study against a fine-step reference.
    Eoc {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, decreasing time steps.
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
        #[arg(long)]
        ref_dt: f64,
        #[arg(long)]
        benchmark: Option<String>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in benchmarks.
    List,
}

fn load(config: &Path, benchmark: Option<String>, scheme: Option<String>, out: Option<PathBuf>) -> Result<RunConfig> {
    let id = benchmark.as_deref().map(BenchmarkId::parse).transpose()?;
    let mut cfg = parse_config(config, id)?;
    if let Some(s) = scheme {
        cfg.set_scheme(SchemeId::parse(&s)?);
    }
    apply_env_override(&mut cfg);
    if let Some(dir) = out {
        cfg.out_dir = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            benchmark,
            scheme,
            out,
        } => {
            let cfg = load(&config, benchmark, scheme, out)?;
            let summary = cmd_run(&cfg).with_context(|| format!("run of '{}' failed", cfg.benchmark))?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} with {}: {} steps, {} rows in {}, {} snapshots",
                cfg.benchmark,
                cfg.scheme,
                summary.steps,
                summary.rows,
                summary.csv.display(),
                summary.snapshots.len()
            );
        }
        Command::Eoc {
            config,
            dts,
            ref_dt,
            benchmark,
            scheme,
            out,
        } => {
            let cfg = load(&config, benchmark, scheme, out)?;
            let table = cmd_eoc(&cfg, &dts, ref_dt)?;
            print!("{}", eoc_csv(&table));
        }
        Command::List => print!("{}", cmd_list()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
