mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Predict task performance of mobile UI layouts and optimize them.
#[derive(Debug, Parser)]
#[command(name = "layoutforge", version)]
struct Cli {
    /// TOML file supplying per-command defaults; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for every random choice the command makes.
    #[arg(long, global = true, env = "LAYOUTFORGE_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write randomized and perturbed-good layouts for a UI template.
    GenLayouts(GenLayoutsArgs),
    /// Write a task sequence for the photo editor or the recipe planner.
    GenSequence(GenSequenceArgs),
    /// Run virtual users over a directory of layouts.
    Simulate(SimulateArgs),
    /// Fit the performance model to a simulated dataset.
    Train(TrainArgs),
    /// Score a model against a dataset.
    Eval(EvalArgs),
    /// Gradient-descent a layout through a trained model.
    Optimize(OptimizeArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ui {
    Photo,
    Recipe,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GenLayoutsArgs {
    /// `photo`, `recipe`, or a path to a template JSON file.
    #[arg(long)]
    pub template: Option<String>,
    /// Perturbed copies of the bundled good layouts.
    #[arg(long)]
    pub good_perturbed: Option<usize>,
    /// Fully random layouts.
    #[arg(long)]
    pub random: Option<usize>,
    /// Also write the bundled good and bad hand-built layouts.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub hand_built: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Either a sequence file or the parameters to build one.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceArgs {
    /// Task sequence JSON; when absent the sequence is built from `--ui`.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub ui: Option<Ui>,
    /// Photos in a photo-editing sequence.
    #[arg(long)]
    pub n_photos: Option<usize>,
    /// Keep only the first N tasks.
    #[arg(long)]
    pub truncate: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct GenSequenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sequence: SequenceArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    /// Directory of layout JSON files; file stems become layout ids.
    #[arg(long)]
    pub layouts: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sequence: SequenceArgs,
    /// Virtual users per layout (at least 3).
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainArgs {
    /// Dataset directory written by `simulate`, or its dataset.json.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Share of layouts kept aside to pick the best epoch.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory for report.json; the report always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sequence: SequenceArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Penalty settings: a JSON list of constraints or a full penalty config.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Disable location swapping of overlapping elements.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_swaps: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Where finished job traces are written.
    #[arg(long)]
    pub trace_root: Option<PathBuf>,
    #[arg(long)]
    pub max_concurrent_jobs: Option<usize>,
    #[arg(long)]
    pub max_queued_jobs: Option<usize>,
    /// Steps for requests that do not give a count.
    #[arg(long)]
    pub default_steps: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    // clap already exits with 2 on usage errors
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
