use std::path::PathBuf;

use bisr_core::FactorizationKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bisr", version, about = "Banded inverse square root factorizations for private training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the leading coefficients of r, r~, C and C^-1.
    Coeffs(CoeffsArgs),
    /// Build a BISR, BSR or identity factorization and write it as JSON.
    Factorize(FactorizeArgs),
    /// Expected error over bandwidths, or over problem sizes with --sizes.
    Sweep(SweepArgs),
    /// Optimize a banded inverse starting from BISR.
    Optimize(OptimizeArgs),
    /// Noise scale of the analytic Gaussian mechanism.
    Calibrate(CalibrateArgs),
    /// Generate correlated noise for a BISR band.
    Noise(NoiseArgs),
    /// Run DP-SGD with correlated noise on a synthetic task.
    Sgd(SgdArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Bisr,
    Bsr,
    Identity,
    Optimized,
}

impl From<Kind> for FactorizationKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Bisr => FactorizationKind::Bisr,
            Kind::Bsr => FactorizationKind::Bsr,
            Kind::Identity => FactorizationKind::Identity,
            Kind::Optimized => FactorizationKind::Optimized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    /// BISR at the bandwidth minimizing its error.
    Selected,
    /// p = b.
    Separation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseMode {
    Stream,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Bowl,
    Linreg,
}

#[derive(Debug, Args)]
pub struct WorkloadArgs {
    #[arg(long)]
    pub n: usize,
    /// Weight decay.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Momentum.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct SchemaArgs {
    /// Maximum participations per example; defaults to ceil(n / b).
    #[arg(long)]
    pub k: Option<usize>,
    /// Minimum separation between participations; defaults to n / k.
    #[arg(long)]
    pub b: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file, `-` for stdout.
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    #[arg(long, value_enum, default_value = "bisr")]
    pub kind: Kind,
    #[command(flatten)]
    pub workload: WorkloadArgs,
    /// Bandwidth.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "bisr")]
    pub kind: Kind,
    /// Number of steps; required unless --sizes is given.
    #[arg(long, required_unless_present = "sizes", conflicts_with = "sizes")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Bandwidths to evaluate; defaults to the dyadic grid up to n.
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Vec<usize>,
    /// Sweep over these sizes instead, with b = size / k.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Bandwidth choice for size sweeps.
    #[arg(long, value_enum, default_value = "selected")]
    pub rule: Rule,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Where to write the per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub delta: f64,
    /// L2 sensitivity.
    #[arg(long, default_value_t = 1.0)]
    pub sens: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Number of steps; also the workload size for the BISR band.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "stream")]
    pub mode: NoiseMode,
    #[arg(long, env = "BISR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SgdArgs {
    #[arg(long, value_enum, default_value = "linreg")]
    pub task: Task,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Number of training steps.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Weight decay.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Momentum.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Bandwidth of the BISR noise correlation.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Noise multiplier; overrides --eps/--delta.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Target epsilon; sigma is calibrated and scaled by the strategy sensitivity.
    #[arg(long, requires = "delta")]
    pub eps: Option<f64>,
    #[arg(long, requires = "eps")]
    pub delta: Option<f64>,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Examples in the generated regression data set.
    #[arg(long, default_value_t = 1000)]
    pub examples: usize,
    #[arg(long, env = "BISR_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}
