use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::formats::{MatrixFormat, PathFormat};

#[derive(Debug, Parser)]
#[command(name = "ctmc-bridge", version, about = "Endpoint-conditioned CTMC path sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit a built-in rate matrix.
    Model(ModelCmd),
    /// Sample endpoint-conditioned paths.
    Sample(SampleCmd),
    /// Predict per-sampler cost and select the cheapest.
    Predict(PredictCmd),
    /// Time the samplers over a grid and fit their cost coefficients.
    Bench(BenchCmd),
    /// Run the statistical checks of sampler correctness.
    Validate(ValidateCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Hky,
    Gy,
    HkyCpg,
    RandomReversible,
    RandomSparseCodon,
}

/// Built-in model parameters. Unset values take the model's defaults.
#[derive(Debug, Clone, Args)]
pub struct ModelParams {
    /// Transition/transversion ratio (hky, hky-cpg, gy). Default 2.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Nonsynonymous/synonymous ratio (gy). Default 0.01.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Rate multiplier out of C (hky-cpg). Default 20.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// A,G,C,T base frequencies (hky) or base rates (hky-cpg).
    #[arg(long, value_delimiter = ',')]
    pub freqs: Option<Vec<f64>>,
    /// CSV file with `codon,frequency` rows (gy). Default: bundled table.
    #[arg(long)]
    pub codon_freqs: Option<PathBuf>,
    /// 64-letter amino-acid table in TCAG codon order, `*` for stops (gy).
    #[arg(long)]
    pub genetic_code: Option<String>,
    /// Number of states (random-reversible).
    #[arg(long)]
    pub n: Option<usize>,
    /// Rescale to one expected jump per unit time at stationarity. Random
    /// models are always calibrated.
    #[arg(long)]
    pub calibrate: bool,
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["matrix", "model"])))]
pub struct MatrixSource {
    /// Rate-matrix file (CSV or JSON).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Format of --matrix; guessed from the extension when omitted.
    #[arg(long, value_enum, requires = "matrix")]
    pub matrix_format: Option<MatrixFormat>,
    /// Built-in model instead of a file.
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    /// Seed for random models.
    #[arg(long, default_value_t = 1)]
    pub model_seed: u64,
    #[command(flatten)]
    pub params: ModelParams,
}

#[derive(Debug, Clone, Args)]
pub struct Endpoints {
    /// Start state label.
    #[arg(long)]
    pub from: String,
    /// End state label.
    #[arg(long)]
    pub to: String,
    /// Time horizon T > 0.
    #[arg(long, short = 'T')]
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerChoice {
    Auto,
    Rejection,
    Direct,
    Uniformization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Exact,
    LargeT,
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    /// Cost-prediction mode.
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeChoice,
    /// TOML file of cost coefficients. Default: the bundled table nearest in
    /// state-space size, read from $CTMC_BRIDGE_COEFFICIENTS_DIR when set.
    #[arg(long)]
    pub coefficients: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelCmd {
    #[arg(value_enum)]
    pub name: ModelName,
    #[command(flatten)]
    pub params: ModelParams,
    /// Seed for random models.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: MatrixFormat,
    /// Write here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleCmd {
    #[command(flatten)]
    pub source: MatrixSource,
    #[command(flatten)]
    pub endpoints: Endpoints,
    #[arg(long, value_enum, default_value = "auto")]
    pub sampler: SamplerChoice,
    /// Number of paths.
    #[arg(long, short = 'k', default_value_t = 1)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: PathFormat,
    /// Write paths here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Rejection proposals per path before giving up.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_attempts: u64,
    #[command(flatten)]
    pub cost: CostArgs,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[command(flatten)]
    pub source: MatrixSource,
    #[command(flatten)]
    pub endpoints: Endpoints,
    #[command(flatten)]
    pub cost: CostArgs,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    #[command(flatten)]
    pub source: MatrixSource,
    /// Horizons to time, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub horizons: Vec<f64>,
    /// Endpoint pairs `a:b`, comma separated. Default: first state to itself
    /// and to the second state.
    #[arg(long, value_delimiter = ',')]
    pub pairs: Vec<String>,
    /// Paths per timing block (each point is the median of 5 blocks).
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "rejection,uniformization,direct")]
    pub samplers: Vec<String>,
    /// State-space sizes for a random-reversible size sweep.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_attempts: u64,
    /// Raw timings CSV. Default: standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Fitted coefficients CSV. Default: standard error.
    #[arg(long)]
    pub fits: Option<PathBuf>,
    /// Write one `n<size>.toml` coefficient file per size into this directory.
    #[arg(long)]
    pub coefficients_out: Option<PathBuf>,
    /// Write the fitted size model (JSON); needs at least 4 sizes.
    #[arg(long)]
    pub size_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateCmd {
    #[command(flatten)]
    pub source: MatrixSource,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,2")]
    pub horizons: Vec<f64>,
    /// Paths per sampler per cell.
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 20090301)]
    pub seed: u64,
    /// Chi-square significance level.
    #[arg(long, default_value_t = 0.001)]
    pub significance: f64,
    /// Standard-error band for mean comparisons.
    #[arg(long, default_value_t = 3.0)]
    pub se_band: f64,
    /// Skip endpoint pairs whose acceptance probability is at or below this.
    #[arg(long, default_value_t = 0.01)]
    pub min_acceptance: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_attempts: u64,
    /// Show every check, not only the per-cell summary.
    #[arg(long)]
    pub verbose: bool,
    /// Test fixture: sample uniformization from a kernel with one R entry swapped.
    #[arg(long, hide = true)]
    pub corrupt_uniformization: bool,
}
