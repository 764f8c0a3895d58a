use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "serfiq", version, about = "Embedding quality from stochastic embedding robustness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic embedding corpus and its ground-truth quality table.
    SynthGen(SynthGenArgs),
    /// Draw a verification protocol (genuine and impostor pairs).
    Pairs(PairsArgs),
    /// Train the dropout classification model on top of embeddings.
    Train(TrainArgs),
    /// Estimate one quality per image.
    Score(ScoreArgs),
    /// Map embeddings through a trained model (penultimate layer).
    Embed(EmbedArgs),
    /// Error-versus-reject curves for one or more quality tables.
    Evaluate(EvaluateArgs),
    /// Histogram of a quality table.
    Histogram(HistogramArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FileFormat {
    Emb1,
    Csv,
}

#[derive(Args, Debug)]
struct SynthGenArgs {
    #[arg(long, default_value_t = 10)]
    identities: usize,
    #[arg(long, default_value_t = 10)]
    images_per_identity: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_low: f64,
    #[arg(long, default_value_t = 0.3)]
    noise_high: f64,
    #[arg(long, default_value_t = 1)]
    prototype_seed: u64,
    #[arg(long, default_value_t = 2)]
    noise_seed: u64,
    /// Embedding file to write.
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth quality CSV (negated noise level).
    #[arg(long)]
    quality_output: Option<PathBuf>,
    /// Defaults to the output extension (`.csv` or emb1).
    #[arg(long, value_enum)]
    format: Option<FileFormat>,
}

#[derive(Args, Debug)]
struct PairsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    impostors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Bce,
    Softmax,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 0.95)]
    rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Weight initialization seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    shuffle_seed: u64,
    #[arg(long, value_enum, default_value_t = LossArg::Bce)]
    loss: LossArg,
    /// Hidden widths between the input and the embedding layer.
    #[arg(long, default_value = "128,512")]
    hidden: String,
    /// Per-epoch loss CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    OnTop,
    SameModel,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::SameModel)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Unit-normalize stochastic embeddings before measuring spread.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FileFormat>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    /// Pair protocol CSV; generated from `--impostors`/`--seed` when absent.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    impostors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quality CSV; repeat for several sources.
    #[arg(long = "quality", required = true)]
    qualities: Vec<PathBuf>,
    /// FNMR operating point at this FMR; repeatable.
    #[arg(long)]
    fmr: Vec<f64>,
    /// Include the EER curve.
    #[arg(long)]
    eer: bool,
    /// Comma list (`0,0.1,0.2`) or `start:step:end`.
    #[arg(long, default_value = "0:0.05:0.9")]
    ratios: String,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct HistogramArgs {
    #[arg(long)]
    quality: PathBuf,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Binning range `lo,hi`.
    #[arg(long, default_value = "0,1")]
    range: String,
    #[arg(long)]
    output: PathBuf,
}

/// Flag values that parse but make no sense together; reported with exit 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SynthGen(a) => commands::synth_gen(a),
        Command::Pairs(a) => commands::pairs(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Embed(a) => commands::embed(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Histogram(a) => commands::histogram(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
