//! Argument grammar of the `segwise` binary.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "segwise",
    version,
    about = "Change-point detection for segment-wise autoregressive time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Penalized quadratic-loss change-point detection on a CSV series.
    Detect(DetectArgs),
    /// Multi-window AR change detection emitting peak ranges.
    Mw(MwArgs),
    /// Binary segmentation with AR prediction loss.
    Bs(BsArgs),
    /// Generate a synthetic series as CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo studies and runtime benchmarks.
    Benchmark(BenchmarkArgs),
    /// Sample partial autocorrelations of a series.
    Pacf(PacfArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Dp,
    Okm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    /// Least squares.
    Ls,
    /// Yule-Walker via the Levinson-Durbin recursion.
    Yw,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV file (comma separated, optional header).
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated column indices (0-based) or header names; all
    /// columns when omitted.
    #[arg(long)]
    pub columns: Option<String>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Penalty as family:multiplier with family aic|hq|bic (constant,
    /// log log N, log N) or custom:<v> for a fixed value v.
    #[arg(long, default_value = "bic:2")]
    pub penalty: String,
    /// Rescale the penalty by the sample variance of the data.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub rescale_var: bool,
    /// Largest candidate number of change points.
    #[arg(long, default_value_t = 10)]
    pub mmax: usize,
    /// Minimum segment length: auto (max(2, ceil(log log N))) or an integer.
    #[arg(long, default_value = "auto")]
    pub beta: String,
    #[arg(long, value_enum, default_value_t = EngineArg::Dp)]
    pub engine: EngineArg,
    /// Random restarts per candidate count (okm engine).
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Seed for randomized engines; required when the run is randomized.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MwArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// AR order of the windowed fits.
    #[arg(long = "order", short = 'L')]
    pub order: usize,
    /// Window sizes: "auto" (N/10,N/20,N/50,N/100) or a decreasing list
    /// like "100,50,20,10".
    #[arg(long, default_value = "auto")]
    pub windows: String,
    /// Score tolerance below the peak.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    /// Cap on the number of returned ranges.
    #[arg(long, default_value_t = 5)]
    pub mmax: usize,
    #[arg(long, default_value = "bic:1")]
    pub penalty: String,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub rescale_var: bool,
    #[arg(long, default_value = "auto")]
    pub beta: String,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Ls)]
    pub estimator: EstimatorArg,
    /// Emit per-round cumulative scores (one row per index per round).
    #[arg(long, default_value_t = false)]
    pub emit_scores: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// AR order of the segment fits.
    #[arg(long = "order", short = 'L')]
    pub order: usize,
    #[arg(long, default_value_t = 4)]
    pub mmax: usize,
    /// Minimum segment length; defaults to max(10 * order, 3).
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long, default_value = "bic:1")]
    pub penalty: String,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub rescale_var: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimulateKind {
    /// Segment-wise autoregression.
    Ar,
    /// Independent Gaussians with segment-wise means.
    Means,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: SimulateKind,
    /// Series length.
    #[arg(long, short = 'n')]
    pub n: usize,
    /// Change-point fractions in (0,1), e.g. "0.1,0.3"; empty for none.
    #[arg(long, default_value = "")]
    pub fractions: String,
    /// Per-segment AR lag coefficients, segments separated by ';',
    /// e.g. "0.8,-0.3;-0.5,0.1;0.5,-0.5" (kind ar).
    #[arg(long)]
    pub filters: Option<String>,
    /// Per-segment means, segments separated by ';' and dimensions by ','
    /// (kind means).
    #[arg(long)]
    pub means: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    /// Warm-up samples discarded before recording (kind ar);
    /// min(100 * (order + 1), 1000) when omitted.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchSuite {
    /// Independent Gaussians with means (-1, 0, 1) and boundaries at
    /// 0.2N and 0.8N.
    Iid,
    /// Segment-wise AR(2) with boundaries at 0.1N and 0.3N.
    Ar,
    /// Runtime comparison of the mw and bs methods.
    Timing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMethod {
    Quad,
    Mw,
    Bs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub suite: BenchSuite,
    /// Series lengths, e.g. "100,300,1000".
    #[arg(long)]
    pub n_list: Option<String>,
    /// Repetitions per length.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Detection method for the iid and ar suites.
    #[arg(long, value_enum)]
    pub method: Option<BenchMethod>,
    /// Draw fresh stable filters per repetition (ar and timing suites).
    #[arg(long, default_value_t = false)]
    pub random_filters: bool,
    #[arg(long, default_value = "bic:1")]
    pub penalty: String,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub rescale_var: bool,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PacfArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 10)]
    pub max_lag: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}
