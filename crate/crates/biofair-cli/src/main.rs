//! `biofair`: fairness audits, DET sweeps, synthetic score populations, and
//! impossibility checks over biometric verification score files.
//!
//! Exit codes: 0 success, 1 input/configuration error, 2 audit gate failure
//! (`audit --gate` with an unfair criterion), 3 impossibility counterexample
//! (a satisfying threshold outside every known degenerate regime).

mod commands;
mod manifest;
mod util;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biofair", version, about = "Fairness audits for biometric verification score sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the three fairness criteria at shared operating points.
    Audit(AuditArgs),
    /// Export DET curves (pooled, and per group with --group-by).
    Sweep(SweepArgs),
    /// Generate a seeded synthetic score population.
    Synth(SynthArgs),
    /// Verify that equalised odds, statistical parity, and predictive
    /// parity only hold together in degenerate regimes.
    CheckImpossibility(CheckArgs),
}

#[derive(Args)]
struct AuditArgs {
    /// Score CSV (pair_id,score,label,<attributes...>).
    #[arg(long)]
    scores: PathBuf,
    /// Attribute schema JSON.
    #[arg(long)]
    schema: PathBuf,
    /// Partitions to audit: comma-separated axes, with `+` joining the axes
    /// of an intersectional partition (e.g. `age,gender,age+gender`).
    #[arg(long, value_delimiter = ',', required = true)]
    partitions: Vec<String>,
    /// Operating points: comma list from eer, fgr@<rate>, zfgr, zfir,
    /// near-zfir, fixed@<threshold>.
    #[arg(long = "operating-points", value_delimiter = ',', required = true)]
    operating_points: Vec<String>,
    /// Unfairness tolerance on absolute gaps.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Output directory (report.json, report.csv, manifest.json).
    #[arg(long)]
    out: PathBuf,
    /// Exit 2 when any criterion is flagged unfair.
    #[arg(long)]
    gate: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Also export one DET curve per cell of this partition
    /// (axes joined with `+`).
    #[arg(long = "group-by")]
    group_by: Option<String>,
    /// Output directory (det.csv, det-<cell>.csv, manifest.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Population spec JSON.
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in population: `unequal-base-rates`.
    #[arg(long)]
    preset: Option<String>,
    /// Generation seed; overrides the seed in --spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (scores.csv, spec.json, schema.json, manifest.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Score CSV to check (requires --schema and --group-by).
    #[arg(long, requires = "schema", requires = "group_by", conflicts_with = "synthetic")]
    scores: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Partition axis (axes joined with `+`) defining the groups.
    #[arg(long = "group-by")]
    group_by: Option<String>,
    /// Run seeded synthetic trials instead of checking a dataset.
    #[arg(long)]
    synthetic: bool,
    /// Number of synthetic trials.
    #[arg(long, default_value_t = 100)]
    trials: u32,
    /// Master seed for the synthetic trials.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Write the verdict JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    configure_thread_pool();
    let command_line: Vec<String> = std::env::args().collect();
    let code = match run(cli, &command_line) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", util::single_line(&err));
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli, command_line: &[String]) -> anyhow::Result<i32> {
    match cli.command {
        Command::Audit(args) => commands::audit::run(&args, command_line),
        Command::Sweep(args) => commands::sweep::run(&args, command_line),
        Command::Synth(args) => commands::synth::run(&args, command_line),
        Command::CheckImpossibility(args) => commands::check::run(&args, command_line),
    }
}

#[cfg(feature = "parallel")]
fn configure_thread_pool() {
    if let Ok(value) = std::env::var("BIOFAIR_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring invalid BIOFAIR_THREADS value `{value}`"),
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_thread_pool() {}
