use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use maxenergy_runner::config::{DiscreteConfig, ExperimentConfig};
use maxenergy_runner::{discrete, eval, init_threads, solve, verify};

#[derive(Parser)]
#[command(name = "maxenergy", version, about = "Kernel energy maximization under density bounds")]
struct Cli {
    /// Worker threads (default: MAXENERGY_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the rearrangement iteration for a JSON experiment config.
    SolveDensity {
        config: PathBuf,
        /// Output directory (overrides the config's `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write density snapshots every K iterations.
        #[arg(long, value_name = "K")]
        snapshot_every: Option<usize>,
    },
    /// Exhaustive search for n ≤ 6 points on [-1, 1].
    SolveDiscrete {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the solver with closed-form optima and print a JSON table.
    VerifyAnalytic {
        #[arg(value_parser = suite_names())]
        suite: Option<String>,
        /// Also write the table to DIR/verify.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Energy of a density file under a kernel given as JSON.
    EvalEnergy {
        domain: PathBuf,
        density: PathBuf,
        kernel: PathBuf,
    },
}

fn suite_names() -> clap::builder::PossibleValuesParser {
    let mut names = verify::SUITES.to_vec();
    names.push("all");
    clap::builder::PossibleValuesParser::new(names)
}

/// Exit status when the iteration hit `max_iter` before becoming stationary.
const NOT_STATIONARY: u8 = 2;

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    init_threads(cli.threads)?;
    match cli.command {
        Command::SolveDensity {
            config,
            out,
            snapshot_every,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(k) = snapshot_every {
                cfg.output.snapshot_every = k;
            }
            let dir = out
                .or_else(|| cfg.output.dir.clone())
                .context("no output directory: pass --out or set output.dir")?;
            let result = solve::run(&cfg, Some(&dir))?;
            let r = &result.report;
            println!(
                "{}: {:?} after {} iterations, energy {}, kkt violating mass {}",
                dir.display(),
                r.solve.stop_reason,
                r.solve.iterations,
                r.final_energy,
                r.solve.kkt_violating_mass
            );
            if !result.stationary() {
                eprintln!("iteration did not become stationary within max_iter = {}", r.max_iter);
                return Ok(ExitCode::from(NOT_STATIONARY));
            }
        }
        Command::SolveDiscrete { config, out } => {
            let cfg = DiscreteConfig::load(&config)?;
            let dir = out
                .or_else(|| cfg.out_dir.clone())
                .context("no output directory: pass --out or set out_dir")?;
            let result = discrete::run(&cfg, Some(&dir))?;
            println!("{}", serde_json::to_string_pretty(&result.report)?);
        }
        Command::VerifyAnalytic { suite, out } => {
            let table = verify::run(suite.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&table)?);
            if let Some(dir) = out {
                maxenergy_runner::output::write_json(&dir.join("verify.json"), &table)?;
            }
            if !table.pass {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::EvalEnergy {
            domain,
            density,
            kernel,
        } => {
            let e = eval::run(&domain, &density, &kernel)?;
            println!("{}", serde_json::to_string_pretty(&e)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
