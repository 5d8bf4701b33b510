//! `steermetrics` — batch driver-distraction metrics over drive telemetry.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use steermetrics_cli::commands::{cmd_extract, cmd_report, cmd_synth, ReportFormat};
use steermetrics_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "steermetrics",
    version,
    about = "Steering-based distraction metrics: synthetic corpora, sequence extraction, \
             and speed-bucketed effect-size reports",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for parallel stages (default: one per core).
    /// Falls back to the STEERMETRICS_JOBS environment variable.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic drive corpus with ground-truth
    /// distraction episodes (one .jsonl per drive + truth.json).
    Synth {
        /// Corpus configuration file (JSON); defaults apply when omitted.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Override the master RNG seed from the config.
        #[arg(long, value_name = "INT")]
        seed: Option<u64>,
    },
    /// Extract interaction sequences and duration-matched baselines from
    /// drive logs; writes interactions.jsonl, baselines.jsonl, and
    /// manifest.json.
    Extract {
        /// Drive logs: files, directories, or glob patterns (.jsonl/.csv).
        /// Repeatable.
        #[arg(long, value_name = "PATH|GLOB", required = true)]
        input: Vec<String>,
        /// Pipeline configuration file (JSON); defaults apply when omitted.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Override the baseline-sampling RNG seed from the config.
        #[arg(long, value_name = "INT")]
        seed: Option<u64>,
    },
    /// Compute per-sequence metrics and the speed-bucketed, curvature-split
    /// comparison report from previously extracted sequences (or end to end
    /// with --all).
    Report {
        /// Drive logs: files, directories, or glob patterns (.jsonl/.csv).
        /// Repeatable. Must be the same corpus the sequences came from.
        #[arg(long, value_name = "PATH|GLOB", required = true)]
        input: Vec<String>,
        /// Pipeline configuration file (JSON); defaults apply when omitted.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Override the baseline-sampling RNG seed from the config.
        #[arg(long, value_name = "INT")]
        seed: Option<u64>,
        /// Directory holding interactions.jsonl / baselines.jsonl
        /// (defaults to --out).
        #[arg(long, value_name = "DIR")]
        sequences: Option<PathBuf>,
        /// Run extraction first, then the report, in one pass.
        #[arg(long)]
        all: bool,
        /// Which report table file(s) to write.
        #[arg(long, value_enum, default_value = "both")]
        format: ReportFormat,
    },
}

/// Resolves --jobs (flag, then STEERMETRICS_JOBS) and sizes the global
/// thread pool. Zero or absent means rayon's default.
fn init_jobs(flag: Option<usize>) -> CliResult<()> {
    let jobs = match flag {
        Some(n) => Some(n),
        None => match std::env::var("STEERMETRICS_JOBS") {
            Err(_) => None,
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                CliError::config(anyhow::anyhow!(
                    "STEERMETRICS_JOBS must be a non-negative integer, got `{v}`"
                ))
            })?),
        },
    };
    if let Some(n) = jobs {
        // An already-built pool (possible in tests) is fine to keep.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_jobs(cli.jobs)?;
    match cli.command {
        Command::Synth { config, out, seed } => cmd_synth(config.as_deref(), &out, seed),
        Command::Extract { input, config, out, seed } => {
            cmd_extract(&input, config.as_deref(), &out, seed)
        }
        Command::Report { input, config, out, seed, sequences, all, format } => cmd_report(
            &input,
            config.as_deref(),
            &out,
            seed,
            sequences.as_deref(),
            all,
            format,
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
