use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minipatch::simgen::{SimModel, SimSpec};
use minipatch::{LearnerSpec, MPConfig, Task};

#[derive(Debug, Parser)]
#[command(name = "minipatch", version, about = "Minipatch ensembles with refit-free feature importance inference and predictive intervals")]
pub struct Cli {
    /// Output format of the report.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,
    /// Report destination. With --format json and no --out the report goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic dataset; writes CSV plus a JSON sidecar with the ground truth.
    Simulate(SimulateArgs),
    /// Train an ensemble and report per-feature importance intervals and tests.
    Infer(InferArgs),
    /// Predictive intervals (regression) or sets (classification) for new rows.
    Predict(PredictArgs),
    /// Monte Carlo importance target on simulated data, with the linear closed form.
    Oracle(OracleArgs),
    /// Replicated simulation experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Correlated,
    CorrelatedPair,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerArg {
    Ridge,
    Tree,
    Constant,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
    pub task: TaskArg,
    /// Response column, by name or zero-based index.
    #[arg(long, default_value = "y")]
    pub target_col: String,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Rows per minipatch (default ⌈√N⌉).
    #[arg(long)]
    pub n: Option<usize>,
    /// Features per minipatch (default ⌈√M⌉).
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of minipatches.
    #[arg(long = "K", default_value_t = 10_000)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = LearnerArg::Ridge)]
    pub learner: LearnerArg,
    #[arg(long, default_value_t = LearnerSpec::DEFAULT_RIDGE_LAMBDA)]
    pub ridge_lambda: f64,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 3)]
    pub min_leaf: usize,
    /// Plain intervals without the variance barrier.
    #[arg(long)]
    pub no_buffer: bool,
    /// Variance-barrier constant.
    #[arg(long = "c", default_value_t = 5e-6)]
    pub buffer_c: f64,
    /// Test each feature at alpha / M.
    #[arg(long)]
    pub bonferroni: bool,
}

impl EnsembleArgs {
    pub fn learner(&self) -> LearnerSpec {
        match self.learner {
            LearnerArg::Ridge => LearnerSpec::Ridge { lambda: self.ridge_lambda },
            LearnerArg::Tree => LearnerSpec::Tree {
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
            },
            LearnerArg::Constant => LearnerSpec::ConstantMean,
        }
    }

    pub fn config(&self) -> MPConfig {
        MPConfig {
            n: self.n,
            m: self.m,
            k: self.k,
            seed: self.seed,
            alpha: self.alpha,
            learner: self.learner(),
            buffer_c: self.buffer_c,
            use_buffer: !self.no_buffer,
            ..MPConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Linear)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
    pub task: TaskArg,
    #[arg(long, default_value_t = 500)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 50)]
    pub n_features: usize,
    /// Coefficient of the first feature.
    #[arg(long, default_value_t = 0.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// Magnitude of the fixed signal features.
    #[arg(long, default_value_t = 5.0)]
    pub signal: f64,
}

impl SimArgs {
    pub fn spec(&self, seed: u64) -> SimSpec {
        let model = match self.model {
            ModelArg::Linear => SimModel::Linear,
            ModelArg::Correlated => SimModel::Correlated,
            ModelArg::CorrelatedPair => SimModel::CorrelatedPair,
            ModelArg::Nonlinear => SimModel::Nonlinear,
        };
        SimSpec {
            signal: self.signal,
            ..SimSpec::new(model, self.task.into(), self.n_obs, self.n_features)
                .with_snr(self.snr)
                .with_rho(self.rho)
                .with_seed(seed)
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Also write the trained ensemble as a snapshot for later `predict` runs.
    #[arg(long)]
    pub save_ensemble: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Training CSV (ignored when --ensemble is given).
    #[arg(long, required_unless_present = "ensemble")]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
    pub task: TaskArg,
    #[arg(long, default_value = "y")]
    pub target_col: String,
    /// Snapshot written by `infer --save-ensemble`.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    /// CSV of new rows; columns are matched to the training features by name.
    #[arg(long)]
    pub test: PathBuf,
    #[command(flatten)]
    pub ensemble_args: EnsembleArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Occluded feature (zero-based).
    #[arg(long, default_value_t = 0)]
    pub feature: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_test: usize,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Interval coverage of the Monte Carlo target.
    Coverage(BenchArgs),
    /// Interval width across sample sizes.
    Width(BenchArgs),
    /// Rejection rates across an SNR grid, with the split baseline.
    Power(BenchArgs),
    /// Bonferroni selection accuracy against the true support.
    Selection(BenchArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub feature: usize,
    /// Sample sizes for coverage and width (defaults to --n-obs).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// SNR grid for power.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0, 10.0])]
    pub snrs: Vec<f64>,
    /// Test points for each replicate's Monte Carlo target.
    #[arg(long, default_value_t = 10_000)]
    pub n_test: usize,
}
