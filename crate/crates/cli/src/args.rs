use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ndpp", version, about = "Learn and query low-rank nonsymmetric DPP kernels")]
pub struct Cli {
    /// Worker threads for parallel loops.
    #[arg(long, global = true, env = "NDPP_THREADS")]
    pub threads: Option<usize>,

    /// Write zero for every wall-clock field so outputs are byte-reproducible.
    #[arg(long, global = true)]
    pub no_timing: bool,

    /// Run manifest path (defaults to `<primary output>.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a kernel to a basket file.
    Train(TrainArgs),
    /// Approximate the most likely size-k subset.
    Map(MapArgs),
    /// Rank next items given a partial basket.
    Predict(PredictArgs),
    /// Score a model on held-out baskets.
    Eval(EvalArgs),
    /// Compare MAP algorithms against local search.
    Bench(BenchArgs),
    /// Greedy bound study on small synthetic kernels.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Basket file, one whitespace-separated basket per line.
    #[arg(long)]
    pub data: PathBuf,
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra key=value overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Training trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Vocabulary output (defaults to `<out>.vocab`).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Write the held-out test baskets here.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Vocabulary file (defaults to `<model>.vocab` when present).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// greedy, sgreedy, mcmc, local, or exact.
    #[arg(long, default_value = "greedy")]
    pub algo: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON result path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated items already in the basket.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub basket: String,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated subset of mpr, auc, ll.
    #[arg(long, default_value = "mpr,auc,ll")]
    pub metrics: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ridge added to every subset minor.
    #[arg(long, default_value_t = ndpp::likelihood::DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = ndpp::training::DEFAULT_MAX_BASKET)]
    pub max_basket: usize,
    /// CSV output path (also printed to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "greedy,sgreedy,mcmc")]
    pub algos: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Kernel rank and MAP budget.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated singular values; defaults to k, k−1, …, 1.
    #[arg(long)]
    pub singular_values: Option<String>,
    /// Use V₁ = V₂.
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_tries: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
