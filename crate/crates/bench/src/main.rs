use std::path::PathBuf;

use anyhow::{Context, Result};
use btit::geometry::resolve_scenario;
use btit::search::{ClockMode, Connection, HeuristicKind, PlannerConfig, PlannerKind, PriorityPolicy, TerminationPolicy};
use btit_bench::{read_summary_file, render, run_trials, summarize, write_reports};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "btit", version, about = "Bidirectional batch-informed kinodynamic planning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and write events.csv and summary.csv.
    Plan(PlanArgs),
    /// Aggregate one or more summary.csv files.
    Summarize {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// Bundled scenario name or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "btit")]
    planner: PlannerKind,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per batch [default: the system's preset].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Seconds per trial [default: the system's preset].
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long, default_value_t = btit::geometry::DEFAULT_SEGMENTS)]
    segments: usize,
    #[arg(long, default_value = "fhat")]
    priority: PriorityPolicy,
    #[arg(long, default_value = "first-lb")]
    termination: TerminationPolicy,
    #[arg(long, default_value = "rdisk")]
    connection: Connection,
    #[arg(long, default_value = "controller")]
    heuristic: HeuristicKind,
    /// `work` is reproducible across machines; `wall` measures real time.
    #[arg(long, default_value = "work")]
    clock: ClockMode,
    /// Disable on-the-fly heuristic updates.
    #[arg(long)]
    no_heuristic_update: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn plan(args: PlanArgs) -> Result<()> {
    let scn = resolve_scenario(&args.scenario).with_context(|| format!("loading scenario `{}`", args.scenario))?;
    let preset = PlannerConfig::for_preset(scn.preset);
    let cfg = PlannerConfig {
        batch_size: args.batch_size.unwrap_or(preset.batch_size),
        time_budget: args.budget.unwrap_or(preset.time_budget),
        seed: args.seed,
        segments: args.segments,
        priority: args.priority,
        termination: args.termination,
        connection: args.connection,
        heuristic: args.heuristic,
        clock: args.clock,
        heuristic_update: !args.no_heuristic_update,
        ..preset
    };
    let trials = run_trials(&scn, args.planner, &cfg, args.trials, args.jobs)?;
    write_reports(&trials, &args.out)?;
    let rows = read_summary_file(&args.out.join("summary.csv"))?;
    print!("{}", render(&summarize(&rows)));
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Plan(args) => plan(args),
        Command::Summarize { files } => {
            let mut rows = Vec::new();
            for f in &files {
                rows.extend(read_summary_file(f)?);
            }
            print!("{}", render(&summarize(&rows)));
            Ok(())
        }
    }
}
