//! Command-line front end: dataset generation, ranking runs, simulations,
//! bias analysis, evaluation and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{BiasArgs, EvalArgs, GenArgs, RankArgs, SimulateArgs, SweepArgs};
pub use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "permsc", version, about = "Permutation self-consistency for listwise rankers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a sorting dataset.
    Gen(GenArgs),
    /// Rank a dataset or rerank a TREC run.
    Rank(RankArgs),
    /// Convergence experiment with a simulated noise model.
    Simulate(SimulateArgs),
    /// Positional-bias analysis of sample traces.
    Bias(BiasArgs),
    /// Score predictions against gold orders or qrels.
    Eval(EvalArgs),
    /// Repeat ranking over a grid of sample counts or temperatures.
    Sweep(SweepArgs),
}

/// Run one command and return its run directory.
pub fn run(cli: Cli) -> CliResult<PathBuf> {
    match cli.command {
        Command::Gen(a) => commands::cmd_gen(&a),
        Command::Rank(a) => commands::cmd_rank(&a),
        Command::Simulate(a) => commands::cmd_simulate(&a),
        Command::Bias(a) => commands::cmd_bias(&a),
        Command::Eval(a) => commands::cmd_eval(&a),
        Command::Sweep(a) => commands::cmd_sweep(&a),
    }
}
