//! Command-line front end: cost benchmarks and the paired training run.

use std::error::Error;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sash::bench::{sweep, sweep_parallel, BenchMode, BenchScenario};
use sash::flsim::{run_experiment, FlConfig};

#[derive(Parser)]
#[command(name = "sash", version, about = "Masked-aggregation benchmarks and training runs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Measure per-round aggregation cost and emit a CSV report.
    ///
    /// One scenario comes from the flags below; --grid replaces them with a
    /// file of scenarios, one `mode M N d reps seed` line each (# comments
    /// allowed). Scenarios whose dropout plan exceeds what the protocol
    /// tolerates still produce a row, with the error column filled in.
    Bench(BenchArgs),
    /// Run the paired plain-vs-masked federated training experiment.
    Train(TrainArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Aggregation mode: sash, secagg-baseline, or plain.
    #[arg(long, default_value = "sash")]
    mode: String,
    /// Cohort size N.
    #[arg(long, default_value_t = 50)]
    clients: usize,
    /// Update length M.
    #[arg(long, default_value_t = 100_000)]
    params: usize,
    /// Fraction of clients that drop during a round.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// Repetitions per scenario.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Scenario grid file; overrides the single-scenario flags.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Worker threads for grid runs. Timings are only comparable across
    /// rows measured at the same worker count.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Flat-text experiment config (`key = value` lines); defaults apply
    /// when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path for the paired curves; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(text: &str) -> Result<Vec<BenchScenario>, Box<dyn Error>> {
    let mut scenarios = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(format!(
                "grid line {}: expected `mode M N d reps seed`, got {} fields",
                lineno + 1,
                fields.len()
            )
            .into());
        }
        let context = |what: &str| format!("grid line {}: bad {what}", lineno + 1);
        scenarios.push(BenchScenario {
            mode: BenchMode::parse(fields[0])?,
            m: fields[1].parse().map_err(|_| context("M"))?,
            n: fields[2].parse().map_err(|_| context("N"))?,
            d: fields[3].parse().map_err(|_| context("d"))?,
            reps: fields[4].parse().map_err(|_| context("reps"))?,
            seed: fields[5].parse().map_err(|_| context("seed"))?,
        });
    }
    if scenarios.is_empty() {
        return Err("grid file holds no scenarios".into());
    }
    Ok(scenarios)
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<(), Box<dyn Error>> {
    match out {
        Some(path) => {
            fs::write(path, content)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<(), Box<dyn Error>> {
    let scenarios = match &args.grid {
        Some(path) => parse_grid(&fs::read_to_string(path)?)?,
        None => {
            let s = BenchScenario {
                mode: BenchMode::parse(&args.mode)?,
                m: args.params,
                n: args.clients,
                d: args.dropout,
                reps: args.reps,
                seed: args.seed,
            };
            s.validate()?;
            vec![s]
        }
    };
    let csv = if args.workers > 1 {
        sweep_parallel(&scenarios, args.workers)
    } else {
        sweep(&scenarios)
    };
    emit(args.out.as_ref(), &csv)
}

fn run_train(args: &TrainArgs) -> Result<(), Box<dyn Error>> {
    let cfg = match &args.config {
        Some(path) => FlConfig::parse(&fs::read_to_string(path)?)?,
        None => FlConfig::default(),
    };
    let report = run_experiment(&cfg)?;
    eprint!("{}", report.config);
    emit(args.out.as_ref(), &report.curves_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Bench(args) => run_bench(args),
        Cmd::Train(args) => run_train(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
