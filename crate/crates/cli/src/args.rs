use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bsnn_core::snn::WeightScale;
use bsnn_core::solver::Backend;
use bsnn_core::train::EncodingKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "bsnn", version, about = "Train, explain and audit binary spiking networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Train a network on a digit subset of MNIST
    Train(TrainArgs),
    /// Run the network on test images and write spike traces
    Simulate(SimulateArgs),
    /// Compute and certify abductive explanations of the network's output
    Explain(ExplainArgs),
    /// Sampled Shapley attributions and the disconnected-pixel audit
    Shap(ShapArgs),
    /// Re-check every trace and explanation in a directory
    Verify(VerifyArgs),
    /// Draw an explanation, attribution report or trace
    Render(RenderArgs),
    /// Re-run a manifest and compare its outputs
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Simulate(_) => "simulate",
            Command::Explain(_) => "explain",
            Command::Shap(_) => "shap",
            Command::Verify(_) => "verify",
            Command::Render(_) => "render",
            Command::Replay(_) => "replay",
        }
    }
}

pub fn parse_encoding(s: &str) -> Result<EncodingKind, String> {
    match s {
        "thresholded" | "threshold" => Ok(EncodingKind::Thresholded),
        "poisson" => Ok(EncodingKind::Poisson),
        _ => Err(format!("unknown encoding {s:?} (expected thresholded or poisson)")),
    }
}

pub fn parse_scale(s: &str) -> Result<WeightScale, String> {
    match s {
        "binary" => Ok(WeightScale::Binary),
        "ternary" => Ok(WeightScale::Ternary),
        _ => Err(format!("unknown weight scale {s:?} (expected binary or ternary)")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?} (expected train or test)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Half-open index range `a..b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRange {
    pub start: usize,
    pub end: usize,
}

impl FromStr for IndexRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad index {x:?}"));
        let (start, end) = (parse(a)?, parse(b)?);
        if end <= start {
            return Err(format!("empty range {s:?}"));
        }
        Ok(Self { start, end })
    }
}

impl fmt::Display for IndexRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct DataArgs {
    /// Directory holding the four MNIST IDX files [default: $BSNN_MNIST_DIR or data/mnist]
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct OutArgs {
    /// Directory for every artifact and its manifest
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,5,9")]
    pub digits: Vec<u8>,
    /// Hidden neurons
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, value_parser = parse_scale, default_value = "binary")]
    pub scale: WeightScale,
    #[arg(long, value_parser = parse_encoding, default_value = "thresholded")]
    pub encoding: EncodingKind,
    /// Time steps [default: 1 thresholded, 8 Poisson]
    #[arg(long)]
    pub t_end: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden_threshold: Option<i32>,
    #[arg(long)]
    pub output_threshold: Option<i32>,
    /// Intensity cut for the thresholded encoding
    #[arg(long)]
    pub theta: Option<f64>,
    /// Use only the first N training images
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of the training split held out for validation
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Which network and how images become spikes.
#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Network JSON written by `train`
    #[arg(long)]
    pub network: PathBuf,
    /// Spike encoding [default: read from training.json beside the network]
    #[arg(long, value_parser = parse_encoding)]
    pub encoding: Option<EncodingKind>,
    #[arg(long)]
    pub t_end: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Seed of the Poisson spike streams
    #[arg(long, default_value_t = 0)]
    pub encoding_seed: u64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct InstanceArgs {
    /// Position in the loaded IDX split
    #[arg(long, conflicts_with = "indices")]
    pub index: Option<usize>,
    /// Batch of positions `a..b` (end exclusive)
    #[arg(long)]
    pub indices: Option<IndexRange>,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Worker threads for batches [default: available cores]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub instances: InstanceArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub instances: InstanceArgs,
    /// Time step whose output pattern is explained
    #[arg(long, default_value_t = 1)]
    pub t: usize,
    #[arg(long, default_value = "cnf")]
    pub backend: Backend,
    /// Shuffle the deletion order with this seed [default: 0]
    #[arg(long, conflicts_with = "raster")]
    pub order_seed: Option<u64>,
    /// Delete literals in pixel raster order instead of a shuffle
    #[arg(long)]
    #[serde(default)]
    pub raster: bool,
    /// Per-call solver limit in seconds
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ShapArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub instances: InstanceArgs,
    /// Coalitions evaluated per instance
    #[arg(long, default_value_t = 10_000)]
    pub sample_size: usize,
    /// Relevance threshold [default: 10% of the largest |score|]
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Directory of trace-*.json and explain-*.json files
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct RenderArgs {
    /// Explanation, attribution report or trace JSON
    #[arg(long)]
    pub artifact: PathBuf,
    /// Network whose wiring gives the green mask
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Integer enlargement factor
    #[arg(long, default_value_t = 1)]
    pub zoom: usize,
    /// Image width in pixels for flat reports
    #[arg(long, default_value_t = 28)]
    pub width: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where the re-run writes; must differ from the recorded directory
    #[arg(long)]
    pub out_dir: PathBuf,
}
