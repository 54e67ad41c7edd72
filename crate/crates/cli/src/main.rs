// SPDX-License-Identifier: MIT OR Apache-2.0
#![forbid(unsafe_code)]

//! `mqseg` command-line tool.

mod commands;
mod io;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Multiscale quantile segmentation.
#[derive(Debug, Parser)]
#[command(name = "mqseg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a piecewise constant quantile function with confidence statements.
    Fit(FitArgs),
    /// Fit the quartiles jointly and merge their changepoints.
    Msb(MsbArgs),
    /// Simulate critical values and store them in the threshold table.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo study on a named scenario.
    Bench(BenchArgs),
    /// Compare an estimate with the truth (MIAE and V-measure).
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CostArg {
    Koenker,
    Runs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RunsMeanArg {
    Classical,
    Shifted,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Level of the multiscale test; the critical value comes from the table.
    #[arg(long, conflicts_with = "q", required_unless_present = "q")]
    alpha: Option<f64>,
    /// Explicit critical value, bypassing the table.
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,
    /// Monte-Carlo replicates used when a critical value must be simulated.
    #[arg(long, default_value_t = mqseg::threshold::DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = mqseg::threshold::DEFAULT_SEED)]
    seed: u64,
    /// Threshold table file (default: $MQSEG_THRESHOLD_PATH or the user cache).
    #[arg(long)]
    threshold_table: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct CostArgs {
    #[arg(long, value_enum, default_value_t = CostArg::Koenker)]
    cost: CostArg,
    /// Mean of the runs count under the null, for `--cost runs`.
    #[arg(long, value_enum, default_value_t = RunsMeanArg::Classical)]
    runs_mean: RunsMeanArg,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// CSV with one observation per line; an optional header is skipped.
    #[arg(long)]
    input: std::path::PathBuf,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct MsbArgs {
    #[arg(long)]
    input: std::path::PathBuf,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    /// One or more levels.
    #[arg(long, required = true, num_args = 1..)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = mqseg::threshold::DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = mqseg::threshold::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    threshold_table: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    threshold_table: Option<std::path::PathBuf>,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Per-index estimate: one value per line, or a CSV with a `value` column.
    #[arg(long)]
    est: std::path::PathBuf,
    /// Per-index truth, same format.
    #[arg(long)]
    truth: std::path::PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<std::path::PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Msb(a) => commands::msb(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Bench(a) => commands::bench(a),
        Command::Eval(a) => commands::eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mqseg: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
