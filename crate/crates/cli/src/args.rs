use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kif_core::KernelChoice;

#[derive(Debug, Parser)]
#[command(name = "kif", version, about = "Kendall Interaction Filter screening")]
pub struct Cli {
    /// Worker threads: a positive number or `max` for all cores.
    #[arg(long, global = true, env = "KIF_THREADS", default_value = "max")]
    pub threads: String,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    /// Thread count for the worker pool; 0 lets the pool use every core.
    pub fn threads(&self) -> Result<usize, String> {
        match self.threads.trim() {
            "max" | "0" => Ok(0),
            t => t
                .parse::<usize>()
                .map_err(|_| format!("--threads expects a positive number or 'max', got '{t}'")),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every feature couple of a CSV dataset and select the top ones.
    Screen(ScreenArgs),
    /// Permutation p-values for chosen couples.
    Permtest(PermtestArgs),
    /// Rerun a simulation study and compare selection rates to reference.
    Reproduce(ReproduceArgs),
    /// Write one simulated dataset as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kernel {
    Auto,
    Bitset,
    Sorted,
}

impl From<Kernel> for KernelChoice {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Auto => KernelChoice::Auto,
            Kernel::Bitset => KernelChoice::Bitset,
            Kernel::Sorted => KernelChoice::Sorted,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    pub label_col: String,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Keep the D highest-scoring couples (default: ceil(n / ln n)).
    #[arg(long, conflicts_with = "threshold")]
    pub top_d: Option<usize>,
    /// Keep couples scoring above C * n^(-R).
    #[arg(long, num_args = 2, value_names = ["C", "R"])]
    pub threshold: Option<Vec<f64>>,
    /// Share of lowest-variance features dropped before pairing.
    #[arg(long, default_value_t = 0.0)]
    pub prescreen: f64,
    #[arg(long, value_enum, default_value_t = Kernel::Auto)]
    pub kernel: Kernel,
    /// Output file; standard output when absent or `-`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    /// List every evaluated couple instead of the selected ones.
    #[arg(long)]
    pub all: bool,
    /// Include wall-clock timings in JSON output.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct PermtestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// TSV with `feature_j` and `feature_l` columns naming the couples, such
    /// as the output of `screen`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Without `--pairs`, test the K highest-scoring couples.
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    /// Pre-screening fraction used to find the top couples.
    #[arg(long, default_value_t = 0.0)]
    pub prescreen: f64,
    #[arg(long, short = 'T', default_value_t = kif_core::permutation::DEFAULT_PERMUTATIONS)]
    pub permutations: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// toy, s1, s2, s3, s4 or s5.
    #[arg(long)]
    pub setting: String,
    /// Model 1-4 for s1/s2; balanced, unbal-73 or unbal-37 for s5.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    /// Label mechanism of settings s1/s2: bernoulli (stated design) or
    /// threshold (Y = 1 when the linear predictor is positive).
    #[arg(long, default_value = "bernoulli")]
    pub logistic_labels: String,
    #[arg(long, short = 'R', default_value_t = 100)]
    pub replications: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
    #[arg(long)]
    pub timings: bool,
    /// Exit with code 1 when a rate falls outside its reference band.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub setting: String,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Label mechanism of settings s1/s2: bernoulli (stated design) or
    /// threshold (Y = 1 when the linear predictor is positive).
    #[arg(long, default_value = "bernoulli")]
    pub logistic_labels: String,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub output: Option<PathBuf>,
}
