use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relher_core::her::HerKind;

mod commands;
mod config;

/// Goal-conditioned Q-learning with hindsight relabeling for STRIPS domains.
#[derive(Debug, Parser)]
#[command(name = "relher", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a Q-network and evaluate the selected checkpoint on the test split
    Train(TrainArgs),
    /// Run the greedy policy of a checkpoint on a set of instances
    Evaluate(EvaluateArgs),
    /// Cut a trajectory into relabeled slices
    Relabel(RelabelArgs),
    /// List the lifted subgoals of a problem's goal
    LiftGoals(LiftArgs),
    /// Write generated instances of a built-in domain
    #[command(alias = "generate")]
    GenerateInstances(GenerateArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Built-in domain (blocks, gripper, maze) or path to a domain file
    #[arg(long)]
    domain: String,
    /// Directory of training problems (default: generated split)
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Relabeling variant: state, prop or lifted
    #[arg(long)]
    her: Option<HerKind>,
    /// Training episodes
    #[arg(long)]
    episodes: Option<usize>,
    /// Seed for network initialization, exploration and sampling
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<domain>-<her>-seed<seed>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for evaluation
    #[arg(long)]
    threads: Option<usize>,
    /// Message-passing layers
    #[arg(long)]
    layers: Option<usize>,
    /// Rollout horizon
    #[arg(long)]
    horizon: Option<usize>,
    /// JSON file overriding the built-in defaults
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    domain: String,
    /// Directory of problems (default: generated test split)
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Directory for report.csv
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Override the checkpoint's layer count
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RelabelArgs {
    #[arg(long)]
    domain: String,
    /// Problem file
    #[arg(long)]
    problem: PathBuf,
    /// JSON-lines trajectory; a random walk is used when absent
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Relabeling variant: state, prop or lifted
    #[arg(long, default_value = "lifted")]
    her: HerKind,
    /// Random-walk length
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct LiftArgs {
    #[arg(long)]
    domain: String,
    /// Problem file
    #[arg(long)]
    problem: PathBuf,
    /// File of atoms, one per line; prints a grounding of every schema in it
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Built-in domain (blocks, gripper, maze)
    #[arg(long)]
    domain: String,
    /// Smallest size (blocks, balls or grid side)
    #[arg(long)]
    min: usize,
    /// Largest size
    #[arg(long)]
    max: usize,
    /// Number of instances, spread evenly over the sizes
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RELHER_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Relabel(a) => commands::relabel(a),
        Command::LiftGoals(a) => commands::lift_goals(a),
        Command::GenerateInstances(a) => commands::generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::MissingDomainFile>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
