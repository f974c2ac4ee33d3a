use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "hiblk",
    version,
    about = "Hierarchical block-sparse recovery with prior support information"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coherence profile of a measurement matrix.
    Coherence(CoherenceArgs),
    /// Reconstructible sparsity bounds from coherence values.
    Bounds(BoundsArgs),
    /// One recovery run, optionally certified against a known signal.
    Recover(RecoverArgs),
    /// Monte Carlo sweep from a preset or a JSON config.
    Sweep(SweepArgs),
    /// Randomized checks of the matrix inequalities.
    Verify(VerifyArgs),
    /// SVG plot of a sweep table.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    /// Matrix file (headerless CSV or HIBLKv01 binary).
    #[arg(long, conflicts_with = "random")]
    pub matrix: Option<PathBuf>,
    /// Draw a normalized Gaussian matrix of shape `MxN` instead.
    #[arg(long, value_name = "MxN")]
    pub random: Option<String>,
    /// Unit block length.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Block lengths for the hierarchical coherences.
    #[arg(long = "d-star", value_delimiter = ',')]
    pub d_star: Vec<usize>,
    /// Mode block length for the hierarchical sub-coherence (default: all columns).
    #[arg(long)]
    pub mode_block: Option<usize>,
    /// `exact` or `sampled:N`.
    #[arg(long, default_value = "exact")]
    pub strategy: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Print only the block-OMP bound `(1/μ_B + d − (d−1)ν/μ_B)/2` and the
    /// block sparsity it admits.
    #[arg(long)]
    pub eldar: bool,
    /// JSON file with bound parameters; flags override its fields.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long = "mu-b")]
    pub mu_b: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long = "mu-hier")]
    pub mu_hier: Option<f64>,
    #[arg(long = "nu-hier")]
    pub nu_hier: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "d-star")]
    pub d_star: Option<usize>,
    #[arg(long = "d-delta")]
    pub d_delta: Option<usize>,
    #[arg(long = "d-star-delta")]
    pub d_star_delta: Option<usize>,
    #[arg(long = "d-bar")]
    pub d_bar: Option<usize>,
    #[arg(long)]
    pub prefix: Option<usize>,
    #[arg(long = "alpha-bar")]
    pub alpha_bar: Option<usize>,
    #[arg(long)]
    pub beta: Option<usize>,
    #[arg(long = "k-n")]
    pub k_n: Option<usize>,
    #[arg(long = "r-units")]
    pub r_units: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    #[value(name = "hibomp-p")]
    HibompP,
    Hibomp,
    Hiomp,
    Bomp,
    Omp,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Measurement vector (one row or one column).
    #[arg(long)]
    pub measurements: PathBuf,
    /// Structure JSON (`dims`, `unit_block`, `sparsity`).
    #[arg(long)]
    pub structure: PathBuf,
    /// Prior support JSON.
    #[arg(long)]
    pub psi: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Algorithm::HibompP)]
    pub algorithm: Algorithm,
    /// Stopping tolerance on the residual norm (default `1e-6‖y‖`).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Known signal; enables the per-step recovery certificate.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Also evaluate the coherence-based condition, computing the needed
    /// coherences with `--strategy`.
    #[arg(long)]
    pub coherence: bool,
    #[arg(long, default_value = "exact")]
    pub strategy: String,
    #[arg(long)]
    pub allow_sampled: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the resolved config as JSON instead of running it.
    #[arg(long)]
    pub print_config: bool,
    /// List the preset names.
    #[arg(long)]
    pub list_presets: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// `all` or a comma-separated list of suite names.
    #[arg(long, default_value = "all", value_delimiter = ',')]
    pub suites: Vec<String>,
    /// Premise-satisfying instances per suite.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Err,
    Nmse,
    FalseAlarm,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Sweep table produced by `sweep`.
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long, value_enum, default_value_t = Metric::Err)]
    pub metric: Metric,
    #[arg(long)]
    pub log_y: bool,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}
