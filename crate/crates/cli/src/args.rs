use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Worst-case sample-removal audits, bounds and simulations for linear regression.
#[derive(Debug, Parser, Serialize)]
#[command(name = "dropaudit", version, args_override_self = true)]
pub struct Cli {
    /// Directory for reports.
    #[arg(long, global = true, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,
    /// Master seed for simulations.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON file of flag values; command-line flags win.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Find rows whose removal moves a coefficient the most.
    Audit(AuditArgs),
    /// Evaluate a theoretical bound on the worst-case removal effect.
    Bounds(BoundsArgs),
    /// Run the Fig. 1 replicates or the regime grid.
    Simulate(SimulateArgs),
    /// Response mean, spread and outlier counts, optionally for removed rows.
    Summarize(SummarizeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Audit(_) => "audit",
            Command::Bounds(_) => "bounds",
            Command::Simulate(_) => "simulate",
            Command::Summarize(_) => "summarize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossArg {
    Squared,
    Huber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    OneGreedy,
    Amip,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetArg {
    /// Stop at the first sign change of the audited coefficient.
    Flip,
    /// Remove exactly `--k` rows, maximizing the drop.
    MaxDelta,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct AuditArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON table schema.
    #[arg(long)]
    pub schema: PathBuf,
    /// `e<j>` (zero-based column j), a column name, or a comma list of weights.
    #[arg(long)]
    pub direction: String,
    #[arg(long, value_enum, default_value_t = LossArg::Squared)]
    pub loss: LossArg,
    /// Huber threshold in response units.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::OneGreedy)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = TargetArg::Flip)]
    pub target: TargetArg,
    /// Removal budget; defaults to n - p for `flip`, required for `max-delta`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Permit brute-force enumeration.
    #[arg(long)]
    pub allow_exhaustive: bool,
    /// Cap on enumerated subsets for brute force.
    #[arg(long)]
    pub budget: Option<u128>,
    /// Huber greedy: refit only this many top candidates per step.
    #[arg(long)]
    pub candidate_limit: Option<usize>,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKindArg {
    AsymptoticLb,
    FiniteSampleLb,
    GaussianUb,
    MisspecRate,
    ConsistencyRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    Gaussian,
    Rademacher,
    Uniform,
    StudentT,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct BoundsArgs {
    #[arg(long, value_enum)]
    pub kind: BoundKindArg,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Removal fraction for `asymptotic-lb` when n and k are not given.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Overrides `(p-1)/(n-k)`.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_inv_norm: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_inv_v_norm: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    /// Degrees of freedom for `student-t` noise.
    #[arg(long)]
    pub df: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_misspec: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_consistency: f64,
    /// Covariate ψ₂ norm; defaults to the Gaussian value.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta_norm: f64,
    /// Absolute constant `C` of the rate bounds.
    #[arg(long, default_value_t = 1.0)]
    pub big_c: f64,
    /// Absolute constant `c` of the conditions and probabilities.
    #[arg(long, default_value_t = 1.0)]
    pub small_c: f64,
    /// Regime cutoff on k/n and p/n.
    #[arg(long, default_value_t = 0.1)]
    pub cutoff: f64,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethodArg {
    Amip,
    OneGreedy,
    AdversarialOracle,
    Theory,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    /// Fig. 1 curves: Σ = I, β = 0, v = e₀.
    #[arg(long, conflicts_with = "regime_grid", required_unless_present = "regime_grid")]
    pub figure1: bool,
    /// Table 1 regime grid.
    #[arg(long)]
    pub regime_grid: bool,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03,0.04,0.05")]
    pub alphas: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "amip,theory")]
    pub methods: Vec<SimMethodArg>,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    #[arg(long)]
    pub df: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    /// Regime grid: sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "200,800,3200")]
    pub n_list: Vec<usize>,
    /// Regime grid: seeds per cell.
    #[arg(long, default_value_t = 30)]
    pub seeds: usize,
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Removed rows by zero-based index.
    #[arg(long, value_delimiter = ',')]
    pub removed: Vec<usize>,
    /// Removed rows by row id.
    #[arg(long, value_delimiter = ',')]
    pub removed_ids: Vec<String>,
    /// Take the removal set from an `audit` report.
    #[arg(long)]
    pub from_audit: Option<PathBuf>,
    #[arg(long)]
    pub dry_run: bool,
}
