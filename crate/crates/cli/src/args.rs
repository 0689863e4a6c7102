use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use stochflow::latent::LatentKind;

#[derive(Parser, Debug)]
#[command(name = "stochflow", version, about = "Learn stable stochastic motion models from demonstrations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model to a demonstration file.
    Train(TrainArgs),
    /// Roll a trained model out from a start point.
    Generate(GenerateArgs),
    /// Compare expected reproductions against demonstrations.
    Eval(EvalArgs),
    /// Assign each trajectory to the model under which it is most likely.
    Classify(ClassifyArgs),
    /// Export the expected velocity field on a regular grid.
    Field(FieldArgs),
    /// Write a synthetic demonstration set.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Demonstration file.
    pub data: PathBuf,
    /// Latent dynamics: `linear` (point-to-point) or `cycle` (rhythmic).
    #[arg(long)]
    pub latent: Option<LatentKind>,
    /// TOML file with training settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Largest sub-sampling stride drawn per iteration.
    #[arg(long)]
    pub smax: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stability margin of the latent dynamics.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Coupling/orthogonal layer pairs in the flow.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Hidden width of the coupling networks.
    #[arg(long)]
    pub width: Option<usize>,
    /// Model output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log file; defaults to the model path with `.log` appended.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    pub model: PathBuf,
    /// Start point, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub start: Vec<f64>,
    /// Number of steps after the start point.
    #[arg(long)]
    pub steps: usize,
    /// Multiplier on the learned diffusion; 0 gives the expected trajectory.
    #[arg(long, default_value_t = 0.0)]
    pub noise_scale: f64,
    /// Required when the noise scale is nonzero.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    /// Text report; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// Candidate model files; a trajectory gets the index of its best model.
    #[arg(required = true)]
    pub models: Vec<PathBuf>,
    /// Trajectory files. A file whose name starts with a model's file stem is
    /// labelled with that model, which enables the confusion matrix.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FieldArgs {
    pub model: PathBuf,
    /// One `lo:hi:count` per axis, comma-separated, e.g. `-1:1:21,-1:1:21`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// `line`, `sine`, `s-curve` (point-to-point) or `circle`, `ellipse`,
    /// `lissajous` (rhythmic).
    pub shape: String,
    #[arg(long, default_value_t = 5)]
    pub demos: usize,
    /// Per-demo deviation (point-to-point) or point noise (rhythmic).
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
