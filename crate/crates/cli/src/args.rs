use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

pub const SUBCOMMANDS: &[&str] = &[
    "transform",
    "conv",
    "verify",
    "equivariance",
    "make-dataset",
    "train",
    "eval",
    "bench",
    "report",
];

pub const GLOBAL_FLAGS: &[&str] = &["threads"];

#[derive(Parser, Debug)]
#[command(
    name = "sphconv",
    version,
    about = "Spherical and SO(3) convolutions via generalized Fourier transforms"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Worker threads; 0 uses one per core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Flat `key = value` file of flags for the subcommand; flags given on
    /// the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Convert between signal (SSIG) and spectrum (SSPC) files, or write a
    /// random band-limited signal.
    Transform(TransformArgs),
    /// Apply a filter bank to a signal or spectrum.
    Conv(ConvArgs),
    /// Run self-check suites; exits 1 if any check fails.
    Verify(VerifyArgs),
    /// Measure the equivariance discrepancy of layers and ReLU stacks.
    Equivariance(EquivarianceArgs),
    /// Project MNIST digits onto the sphere and write a dataset file.
    MakeDataset(MakeDatasetArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Time library operations.
    Bench(BenchArgs),
    /// Summarize metrics streams as text tables.
    Report(ReportArgs),
}

/// Comma-separated list given as a single flag value.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

impl<T: Serialize> Serialize for List<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainArg {
    S2,
    So3,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Args, Debug, Serialize)]
pub struct TransformArgs {
    /// SSIG or SSPC file; the direction follows from its magic.
    #[arg(long, required_unless_present = "generate")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Write a random real band-limited signal instead of converting.
    #[arg(long, conflicts_with = "input")]
    pub generate: bool,
    #[arg(long, value_enum, default_value_t = DomainArg::S2)]
    pub domain: DomainArg,
    #[arg(long, default_value_t = 8)]
    pub b: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct ConvArgs {
    /// SSIG or SSPC file on S² or SO(3).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// SSPC file holding the filters as `K_out·K_in` channels, output-major.
    /// Random real filters are drawn when absent.
    #[arg(long)]
    pub filters: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub out_channels: usize,
    /// Bandwidth of random filters; defaults to the input bandwidth.
    #[arg(long)]
    pub filter_b: Option<usize>,
    /// Write the result as an SO(3) signal instead of a spectrum.
    #[arg(long)]
    pub as_signal: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteArg {
    Roundtrip,
    Orthogonality,
    ConvolutionTheorem,
    Equivariance,
    Gradient,
    All,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 8)]
    pub b: usize,
    #[arg(long, default_value_t = 2)]
    pub channels: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    /// One spectral convolution layer.
    Single,
    /// Conv+ReLU stacks of depth 0..=l-max.
    Depth,
    /// A fixed-depth stack over several bandwidths.
    Resolution,
}

#[derive(Args, Debug, Serialize)]
pub struct EquivarianceArgs {
    #[arg(long, value_enum, default_value_t = Sweep::Depth)]
    pub sweep: Sweep,
    /// Input domain of the single-layer measurement.
    #[arg(long, value_enum, default_value_t = DomainArg::So3)]
    pub domain: DomainArg,
    #[arg(long, default_value_t = 10)]
    pub b: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Trials per measurement.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub l_max: usize,
    /// Depth used by the resolution sweep.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    #[arg(long, default_value = "5,10,15,20")]
    pub bandwidths: List<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Table destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    T10k,
}

#[derive(Args, Debug, Serialize)]
pub struct MakeDatasetArgs {
    /// Directory with `<split>-images-idx3-ubyte[.gz]` and labels.
    #[arg(long, default_value = "data/mnist")]
    pub mnist_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Train)]
    pub split: Split,
    #[arg(long, default_value_t = 10)]
    pub b: usize,
    /// Apply an independent random rotation to every example.
    #[arg(long)]
    pub rotate: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep only the first N digits.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadArg {
    Spatial,
    Invariant,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Dataset scored after every epoch.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Checkpoint destination.
    #[arg(long)]
    pub output: PathBuf,
    /// Metrics stream destination (JSON lines); epochs also go to stdout.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Input, hidden and final bandwidths.
    #[arg(long, default_value = "10,5,3")]
    pub bandwidths: List<usize>,
    /// Channels after the S² and SO(3) convolutions.
    #[arg(long, default_value = "20,30")]
    pub channels: List<usize>,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, value_enum, default_value_t = HeadArg::Spatial)]
    pub head: HeadArg,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label for the records, e.g. `NR/R` (training/test regime).
    #[arg(long, default_value = "eval")]
    pub regime: String,
    /// Append prediction and summary records to this file.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Exit 1 when accuracy falls below this value.
    #[arg(long)]
    pub min_accuracy: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    /// Operation name, or `all`.
    #[arg(long, default_value = "all")]
    pub op: String,
    #[arg(long, default_value = "2,4,8")]
    pub bandwidths: List<usize>,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    /// Metrics streams; `-` reads stdin.
    #[arg(default_value = "-")]
    pub inputs: Vec<PathBuf>,
}
