use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use disc_core::synth::Problem;
use disc_core::KernelSpec;

#[derive(Debug, Parser)]
#[command(name = "disc", version, about = "Differential spectral clustering of features")]
pub struct Cli {
    /// Worker threads for the numerical kernels (defaults to all cores).
    #[arg(long, global = true, env = "DISC_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug). `RUST_LOG` overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Differential vectors for a pair of datasets.
    Run(RunArgs),
    /// Differential vectors for three or more datasets.
    Multi(MultiArgs),
    /// Write one of the synthetic toy problems to CSV.
    Synth(SynthArgs),
    /// Stochastic-block-model slope and recovery experiments.
    SbmValidate(SbmArgs),
    /// K-means on the rows of a saved loading matrix.
    Cluster(ClusterArgs),
    /// Classification accuracy of cluster-mean features built from differential vectors.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// Neighbour rank for the self-tuning bandwidths (default: ceil(ln p)).
    #[arg(long, conflicts_with = "bandwidth")]
    pub knn_k: Option<usize>,

    /// Use a fixed-bandwidth RBF kernel with this epsilon instead of self-tuning.
    #[arg(long)]
    pub bandwidth: Option<f64>,

    /// Standardize every column to zero mean and unit variance before building graphs.
    #[arg(long)]
    pub zscore: bool,
}

impl KernelArgs {
    pub fn spec(&self) -> KernelSpec {
        match self.bandwidth {
            Some(bandwidth) => KernelSpec::Fixed { bandwidth },
            None => KernelSpec::SelfTuning { knn_k: self.knn_k },
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSVs have no header row; feature ids are generated.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Samples-by-features CSV for dataset A.
    #[arg(long)]
    pub a: PathBuf,
    /// Samples-by-features CSV for dataset B.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub d_a: usize,
    #[arg(long, default_value_t = 20)]
    pub d_b: usize,
    /// Number of differential vectors kept (default: min(10, p)).
    #[arg(long)]
    pub r: Option<usize>,
    /// Also cluster the features of each result into this many groups.
    #[arg(long)]
    pub k_clusters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the kernel matrices as w_a.csv and w_b.csv.
    #[arg(long)]
    pub dump_w: bool,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MultiArgs {
    /// Dataset CSVs, in order; results are named a, b, c, ...
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Eigenvector count per dataset: one value for all, or one per input.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub d: Vec<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub k_clusters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_problem(s: &str) -> Result<Problem, String> {
    s.replace('-', "_").parse::<Problem>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// newly-connected, split-groups, split-both, multi3 or partial-corr.
    #[arg(long, value_parser = parse_problem)]
    pub problem: Problem,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Correlation level of the partially connected block (partial-corr only).
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SbmArgs {
    #[arg(long = "l", value_delimiter = ',', default_value = "500,1000,2000")]
    pub l_grid: Vec<usize>,
    #[arg(long = "alpha", value_delimiter = ',', default_value = "0.6,0.7,0.8,0.9")]
    pub alpha_grid: Vec<f64>,
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, default_value_t = 0.2)]
    pub q: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip the threshold-recovery experiment.
    #[arg(long)]
    pub no_recovery: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Loading matrix as written by `run` (feature_id,v1,...).
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Use only the first r columns.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Training CSV for one class; repeat once per class.
    #[arg(long = "train", num_args = 1..)]
    pub train: Vec<PathBuf>,
    /// Test CSV for one class, in the same class order as --train.
    #[arg(long = "test", num_args = 1..)]
    pub test: Vec<PathBuf>,
    /// Training CSV with the class label in the first column.
    #[arg(long, conflicts_with = "train", requires_all = ["labeled_test", "classes"])]
    pub labeled_train: Option<PathBuf>,
    #[arg(long, conflicts_with = "test")]
    pub labeled_test: Option<PathBuf>,
    /// Labels to keep from the labelled files, in class order.
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<usize>,
    /// Keep at most this many training samples per class (first occurrences).
    #[arg(long)]
    pub max_train: Option<usize>,
    /// Keep at most this many test samples per class (first occurrences).
    #[arg(long)]
    pub max_test: Option<usize>,
    /// Eigenvector counts to evaluate; several values produce a sweep.
    #[arg(long, value_delimiter = ',', default_value = "20")]
    pub d: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub vectors_per_class: usize,
    #[arg(long, default_value_t = 3)]
    pub k_clusters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
