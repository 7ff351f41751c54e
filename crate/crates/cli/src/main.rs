//! `ydyn` — declare a set-valued system, simulate solution bundles, build
//! cell reachability relations, and verify invariance, limit-set, and
//! invariant-measure properties.
//!
//! Exit codes: 0 when every computed verdict passes, 1 when any verdict
//! fails, 2 on usage or configuration errors.

mod commands;
mod config;
mod plot;

use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ydyn", version, about = "set-valued dynamics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Config file, or a manifest.json from a previous run (reproduces it).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and the run manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker-thread cap; results never depend on it. Falls back to
    /// YDYN_THREADS, then 1.
    #[arg(long)]
    threads: Option<usize>,
    /// Report/artifact format: csv and json are always written by their
    /// owning formats; svg additionally renders plottable artifacts.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the declared system into a solution bundle on disk.
    Simulate(RunArgs),
    /// Build the cell relation and compute reach tubes from the seed cells.
    Reach(RunArgs),
    /// Viability kernel of the grid with invariance verdicts.
    Invariance(RunArgs),
    /// Limit-set reports for the configured base cells.
    Limits(RunArgs),
    /// Construct the configured measure and verify sub-invariance.
    Measure(RunArgs),
    /// Recurrence and full-measure checks for the configured measure.
    Recurrence(RunArgs),
    /// Axiom diagnostics for the simulated bundle.
    Check(RunArgs),
    /// Render an artifact (bundle dir, measure CSV, limit report, reach tube)
    /// to SVG.
    Plot {
        /// Artifact path.
        artifact: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Coordinate projection for trajectories, e.g. `0,1`.
        #[arg(long, value_delimiter = ',')]
        proj: Option<Vec<usize>>,
    },
}

fn threads_from(args: &RunArgs) -> usize {
    args.threads
        .or_else(|| {
            std::env::var("YDYN_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1)
}

fn run(
    args: &RunArgs,
    f: impl FnOnce(&RunConfig, &std::path::Path, usize) -> ydyn_core::Result<commands::Outcome>,
) -> ExitCode {
    if !matches!(args.format.as_str(), "json" | "csv" | "svg") {
        eprintln!(
            "error: unknown format {:?} (expected csv, json or svg)",
            args.format
        );
        return ExitCode::from(2);
    }
    let cfg = match RunConfig::load(&args.config, args.seed) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match f(&cfg, &args.out, threads_from(args)) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("wrote {}", args.out.join(a).display());
            }
            if args.format == "svg" {
                for a in &outcome.artifacts {
                    let path = args.out.join(a);
                    let plottable = path.is_dir()
                        || a.ends_with(".csv") && a != "cell_relation.txt"
                        || a.starts_with("limit_")
                        || a == "reach_tube.json";
                    if plottable {
                        if let Err(e) = commands::plot_artifact(&path, &args.out, None) {
                            eprintln!("error: {e}");
                            return ExitCode::from(2);
                        }
                    }
                }
            }
            if outcome.all_pass {
                println!("all verdicts pass");
                ExitCode::SUCCESS
            } else {
                println!("verdict failed (see reports in {})", args.out.display());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => run(args, commands::simulate),
        Command::Reach(args) => run(args, commands::reach),
        Command::Invariance(args) => run(args, commands::invariance),
        Command::Limits(args) => run(args, commands::limits),
        Command::Measure(args) => run(args, commands::measure),
        Command::Recurrence(args) => run(args, commands::recurrence),
        Command::Check(args) => run(args, commands::check),
        Command::Plot { artifact, out, proj } => {
            match commands::plot_artifact(artifact, out, proj.as_deref()) {
                Ok(outcome) => {
                    for a in &outcome.artifacts {
                        println!("wrote {}", out.join(a).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
