mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evtae::ErrorClass;

/// Detect electric vehicles behind household smart meters with a temporal
/// convolutional autoencoder.
#[derive(Debug, Parser)]
#[command(name = "evtae", version)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for generation, splitting and initialization.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving every output file and the resolved config.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled dataset.
    Gen(GenArgs),
    /// Split, fit the scaler on training non-EV consumers and write windows.
    Preprocess(DataArgs),
    /// Train the autoencoder and calibrate its threshold.
    Train(TrainArgs),
    /// Score and classify every consumer of a dataset.
    Detect(DetectArgs),
    /// Compare a detection report with ground-truth labels.
    Eval(EvalArgs),
    /// Run one experiment per loss-weight combination.
    Ablate(AblateArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// full (1106 + 139 consumers, 92 days), small or tiny.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub n_ev: Option<usize>,
    #[arg(long)]
    pub n_non_ev: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    /// low, high or mixed.
    #[arg(long)]
    pub demand: Option<String>,
    /// Probability that an EV consumer charges on a given day.
    #[arg(long)]
    pub charge_prob: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Readings CSV (`consumer_id,timestamp,kwh`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Labels CSV (`consumer_id,label`); defaults to `labels.csv` next to the data.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Single loss: l2, dtw or cosine.
    #[arg(long, conflicts_with = "lambda")]
    pub loss: Option<String>,
    /// Loss weights `l2,dtw,cosine`, e.g. `1,0,1`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Soft-DTW smoothing.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub loss: LossArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Readings of non-EV validation consumers; when given, the threshold is
    /// recomputed from them instead of read from the model.
    #[arg(long)]
    pub validation: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Use the four combinations (1,0,1), (1,1,0), (0,1,1), (1,1,1).
    #[arg(long)]
    pub paper_grid: bool,
    /// Grid entry `l2,dtw,cosine`; repeatable.
    #[arg(long = "lambda")]
    pub lambdas: Vec<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random instances per component.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
        ErrorClass::Io => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
