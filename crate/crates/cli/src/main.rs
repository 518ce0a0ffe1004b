//! `slsoh`: command-line pipeline for second-life battery SOH estimation.
//!
//! Every command reads one JSON config (all sections optional) and works
//! inside an output directory. The JSON summary goes to stdout; failures
//! print `{"error": {"kind", "message"}}` to stderr.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use slsoh_core::error::Error;
use slsoh_core::pipeline::{
    cmd_adaptive, cmd_evaluate, cmd_extract, cmd_rank, cmd_simulate, cmd_train, cmd_validate, run_all, Layout,
    PipelineConfig,
};

#[derive(Debug, Parser)]
#[command(name = "slsoh", version, about = "Second-life battery state-of-health pipeline")]
struct Cli {
    /// JSON config file. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Simulate the aging campaign and write telemetry plus ground truth.
    Simulate,
    /// Segment telemetry and write labeled feature snapshots.
    Extract,
    /// Rank features by mRMR on the training cells.
    Rank,
    /// Grid-search and fit the elastic-net model.
    Train,
    /// Write train/test metrics and per-snapshot PCEPE.
    Evaluate,
    /// Run the bounded adaptive estimator over each test cell.
    Adaptive,
    /// Check every artifact in the output directory against its schema.
    Validate,
    /// Run simulate through adaptive in order.
    Run,
}

fn execute(cli: &Cli) -> Result<(Value, bool), Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let layout = Layout::new(&cli.out);
    let summary = match cli.command {
        Command::Simulate => cmd_simulate(&cfg, &layout)?,
        Command::Extract => cmd_extract(&cfg, &layout)?,
        Command::Rank => cmd_rank(&cfg, &layout)?,
        Command::Train => cmd_train(&cfg, &layout)?,
        Command::Evaluate => cmd_evaluate(&cfg, &layout)?,
        Command::Adaptive => cmd_adaptive(&cfg, &layout)?,
        Command::Validate => cmd_validate(&cfg, &layout)?,
        Command::Run => run_all(&cfg, &layout)?,
    };
    let ok = summary.get("ok").and_then(Value::as_bool).unwrap_or(true);
    Ok((summary, ok))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((summary, ok)) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("{}", json!({ "error": { "kind": err.kind(), "message": err.to_string() } }));
            if err.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
