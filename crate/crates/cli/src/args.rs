use std::num::NonZeroUsize;
use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand, ValueEnum};
use svls_core::phantom::PhantomKind;
use svls_core::SmoothingMethod;

#[derive(Parser, Debug)]
#[command(name = "svls", version, about = "Soft-label encoding, multi-rater fusion and calibration metrics for label volumes")]
pub struct Cli {
    /// Worker threads [default: available cores]
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<NonZeroUsize>,

    /// TOML file whose keys mirror the long flags; flags given on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the smoothing stencil
    Kernel(KernelArgs),
    /// Turn a label volume into soft labels
    Encode(EncodeArgs),
    /// Fuse several annotations of the same volume
    Fuse(FuseArgs),
    /// Cross-entropy of a prediction against a target
    Loss(LossArgs),
    /// Segmentation and calibration metrics
    Evaluate(EvaluateArgs),
    /// Generate a synthetic test volume
    Phantom(PhantomArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Encode(_) => "encode",
            Command::Fuse(_) => "fuse",
            Command::Loss(_) => "loss",
            Command::Evaluate(_) => "evaluate",
            Command::Phantom(_) => "phantom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelFormat {
    Json,
    Text,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    /// Number of spatial axes
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub rank: u8,

    /// Gaussian width in voxels
    #[arg(long, default_value_t = 1.0, value_name = "F")]
    pub sigma: f64,

    #[arg(long, value_enum, default_value_t = KernelFormat::Json)]
    pub format: KernelFormat,

    /// Write to a file instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EncodeMethod {
    Onehot,
    Ls,
    Svls,
}

impl From<EncodeMethod> for SmoothingMethod {
    fn from(m: EncodeMethod) -> Self {
        match m {
            EncodeMethod::Onehot => SmoothingMethod::OneHot,
            EncodeMethod::Ls => SmoothingMethod::Ls,
            EncodeMethod::Svls => SmoothingMethod::Svls,
        }
    }
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Label volume, or a directory of them
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,

    #[arg(long, value_enum)]
    pub method: EncodeMethod,

    /// Smoothing weight for `ls` (required there, no default)
    #[arg(long, value_name = "F")]
    pub alpha: Option<f64>,

    /// Gaussian width for `svls` [default: 1]
    #[arg(long, value_name = "F")]
    pub sigma: Option<f64>,

    /// Output file, or a directory when the input is one
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FuseMethod {
    Msvls,
    Moh,
}

impl From<FuseMethod> for SmoothingMethod {
    fn from(m: FuseMethod) -> Self {
        match m {
            FuseMethod::Msvls => SmoothingMethod::Msvls,
            FuseMethod::Moh => SmoothingMethod::Moh,
        }
    }
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    /// One label volume per rater, or a single directory holding them
    #[arg(long = "in", value_name = "PATH", num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,

    #[arg(long, value_enum)]
    pub method: FuseMethod,

    /// Gaussian width for `msvls` [default: 1]
    #[arg(long, value_name = "F")]
    pub sigma: Option<f64>,

    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PredKind {
    Probs,
    Logits,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReductionArg {
    Mean,
    Sum,
}

#[derive(Args, Debug)]
pub struct LossArgs {
    /// Label or probability volume, or a directory of them
    #[arg(long, value_name = "PATH")]
    pub target: PathBuf,

    /// Prediction volume, or a directory with matching file names
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,

    /// How to read the prediction [default: taken from the file]
    #[arg(long, value_enum)]
    pub pred_kind: Option<PredKind>,

    #[arg(long, value_enum, default_value_t = ReductionArg::Mean)]
    pub reduction: ReductionArg,

    /// Report file, or a directory in batch mode
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Reference label volume, or a directory of them
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: PathBuf,

    /// Predicted labels or probabilities, or a directory with matching file names
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,

    /// Surface Dice tolerance in millimetres
    #[arg(long, default_value_t = 2.0, value_name = "MM")]
    pub sd_tolerance: f64,

    #[arg(long, default_value_t = 15, value_name = "N")]
    pub ece_bins: usize,

    #[arg(long, default_value = "1e-3", value_name = "F")]
    pub tace_threshold: f64,

    #[arg(long, default_value_t = 15, value_name = "N")]
    pub tace_ranges: usize,

    /// Leave out voxels whose reference class is 0 from the calibration metrics
    #[arg(long)]
    pub foreground_only: bool,

    /// Extra rows for merged classes, e.g. `WT=1+2+3,TC=1+3`
    #[arg(long, value_name = "MAP")]
    pub region_merge: Option<String>,

    /// Add the unweighted mean over foreground classes
    #[arg(long)]
    pub composite: bool,

    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Comma-separated extents, slowest axis first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    let dims = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if !(2..=3).contains(&dims.len()) {
        return Err(format!("expected 2 or 3 extents, got {}", dims.len()));
    }
    Ok(Dims(dims))
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, value_parser = PossibleValuesParser::new(PhantomKind::ALL.map(|k| k.as_str()))
        .map(|s| s.parse::<PhantomKind>().expect("listed kinds parse")))]
    pub kind: PhantomKind,

    /// Extents such as `32,32,32` or `64,64`
    #[arg(long, value_parser = parse_dims, value_name = "X,Y,Z")]
    pub dims: Dims,

    /// Number of classes [default: the minimum the kind needs]
    #[arg(long, value_name = "N")]
    pub classes: Option<usize>,

    /// Write this many jittered annotations into the output directory
    #[arg(long, value_name = "D", requires = "jitter", conflicts_with = "strength")]
    pub raters: Option<usize>,

    /// Largest boundary displacement per rater, in voxels
    #[arg(long, value_name = "J", requires = "raters")]
    pub jitter: Option<usize>,

    /// Confidence inflation for `miscalibrated_pred`
    #[arg(long, value_name = "F")]
    pub strength: Option<f64>,

    #[arg(long, default_value_t = 0, value_name = "S")]
    pub seed: u64,

    /// Output file, or a directory when `--raters` is given
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}
