//! Seeded data generation for Models 1 and 2 and the replicate drivers for
//! the Fig. 1 curves and the Table 1 regime grid.
//!
//! Every replicate draws its data from `split_seed(master_seed, r, stream)`,
//! runs on its own copy of everything, and is reduced in index order, so
//! results do not depend on the thread count.

mod generate;
mod grid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{adversarial_audit, amip_audit, one_greedy, AuditOptions, AuditQuery, Target};
use crate::bounds::{asymptotic_lower_bound, BoundParams, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::factor_spd;
use crate::regression::Loss;
use crate::scalar::euclid_norm;

pub use generate::{gen_model1, gen_model2, split_seed, CovariateFamily, Misspec, Model2Sample, ResponseMap};
pub use grid::{run_regime_grid, GridCell, GridConfig, GrowthRule, RatioSetting, RegimeGrid, RegionTrend};

/// Stream tag for the dataset of a Fig. 1 replicate.
pub const DATA_STREAM: u16 = 0;
pub const DEFAULT_MAX_FAILURE_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Model2(ModelSpec),
    Model1(Misspec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    Amip,
    OneGreedy,
    AdversarialOracle,
    Theory,
}

impl SimMethod {
    pub fn name(self) -> &'static str {
        match self {
            SimMethod::Amip => "amip",
            SimMethod::OneGreedy => "one_greedy",
            SimMethod::AdversarialOracle => "adversarial_oracle",
            SimMethod::Theory => "theory",
        }
    }
}

fn default_failure_rate() -> f64 {
    DEFAULT_MAX_FAILURE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: SimModel,
    pub n: usize,
    pub p: usize,
    pub replicates: usize,
    pub alphas: Vec<f64>,
    pub direction: Vec<f64>,
    pub master_seed: u64,
    pub methods: Vec<SimMethod>,
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
}

/// `k = round(αn)` with ties to even.
pub fn removal_count(alpha: f64, n: usize) -> usize {
    (alpha * n as f64).round_ties_even() as usize
}

impl SimulationConfig {
    /// Fig. 1 setup: `Σ = I`, `β = 0`, standard Gaussian noise, `v = e₁`.
    pub fn figure1(n: usize, p: usize, replicates: usize, alphas: Vec<f64>, master_seed: u64) -> Self {
        let mut direction = vec![0.0; p];
        if p > 0 {
            direction[0] = 1.0;
        }
        Self {
            model: SimModel::Model2(ModelSpec::isotropic(p)),
            n,
            p,
            replicates,
            alphas,
            direction,
            master_seed,
            methods: vec![SimMethod::Amip, SimMethod::Theory],
            max_failure_rate: DEFAULT_MAX_FAILURE_RATE,
        }
    }

    pub fn ks(&self) -> Vec<usize> {
        self.alphas.iter().map(|&a| removal_count(a, self.n)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods must be non-empty"));
        }
        if self.alphas.is_empty() {
            return Err(Error::invalid("alphas must be non-empty"));
        }
        if let Some(&a) = self.alphas.iter().find(|&&a| !(a > 0.0 && a < 0.5)) {
            return Err(Error::AlphaOutOfRange(a));
        }
        if self.p == 0 || self.n < self.p {
            return Err(Error::invalid(format!("need 1 <= p <= n, got n = {}, p = {}", self.n, self.p)));
        }
        if self.direction.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "direction",
                expected: self.p,
                found: self.direction.len(),
            });
        }
        if !(euclid_norm(&self.direction) > 0.0) {
            return Err(Error::invalid("direction must be non-zero"));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::invalid("max_failure_rate must lie in [0, 1]"));
        }
        let k_max = self.ks().into_iter().max().unwrap_or(0);
        if k_max > self.n - self.p {
            return Err(Error::invalid(format!("k = {k_max} exceeds n - p = {}", self.n - self.p)));
        }
        match &self.model {
            SimModel::Model2(spec) => {
                spec.validate()?;
                if spec.p() != self.p {
                    return Err(Error::DimensionMismatch {
                        what: "model dimension",
                        expected: self.p,
                        found: spec.p(),
                    });
                }
            }
            SimModel::Model1(m) => {
                m.validate(self.p)?;
                if self
                    .methods
                    .iter()
                    .any(|m| matches!(m, SimMethod::AdversarialOracle | SimMethod::Theory))
                {
                    return Err(Error::invalid(
                        "adversarial_oracle and theory need the Model 2 noise law",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Aggregate over replicates for one `(alpha, method)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub k: usize,
    pub method: SimMethod,
    pub mean: f64,
    /// Sample standard deviation (divisor `N - 1`) of the per-dataset values;
    /// 0 when fewer than two replicates succeeded.
    pub sd: f64,
    pub n_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub alpha: f64,
    pub k: usize,
    /// Asymptotic lower bound `‖Σ^{-1/2}v‖σ_ε E[εz·1(εz > q)]/(1-α)`.
    pub value: f64,
    /// The same value times `1 - γ`, `γ = (p-1)/(n-k)`.
    pub value_with_gamma_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub method: SimMethod,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMetadata {
    pub seed_derivation: String,
    pub sd_convention: String,
    pub k_rounding: String,
    /// Curves of the original figure that this harness does not produce.
    pub absent_series: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    /// Dataset seed of each replicate.
    pub seeds: Vec<u64>,
    pub curves: Vec<CurvePoint>,
    pub theory: Vec<TheoryPoint>,
    pub failures: Vec<ReplicateFailure>,
    pub metadata: SimulationMetadata,
}

impl SimulationResult {
    pub fn curve(&self, method: SimMethod) -> Vec<&CurvePoint> {
        self.curves.iter().filter(|c| c.method == method).collect()
    }
}

/// Per-replicate outcome: one delta per alpha for each empirical method.
type Outcome = Vec<(SimMethod, std::result::Result<Vec<f64>, String>)>;

fn at_prefixes(path: &[f64], ks: &[usize]) -> Vec<f64> {
    ks.iter().map(|&k| if k == 0 { 0.0 } else { path[k - 1] }).collect()
}

fn run_replicate(cfg: &SimulationConfig, seed: u64, ks: &[usize], methods: &[SimMethod]) -> Outcome {
    let k_max = ks.iter().copied().max().unwrap_or(0);
    let sample = match &cfg.model {
        SimModel::Model2(spec) => gen_model2(spec, cfg.n, seed),
        SimModel::Model1(m) => generate::sample_model1(m, cfg.n, cfg.p, seed),
    };
    let sample = match sample {
        Ok(s) => s,
        Err(e) => return methods.iter().map(|&m| (m, Err(e.to_string()))).collect(),
    };
    let data = &sample.data;
    let options = AuditOptions::default();
    methods
        .iter()
        .map(|&m| {
            let query = || AuditQuery::new(cfg.direction.clone(), k_max, Target::MaximizeDelta, Loss::Squared);
            let trace = match m {
                SimMethod::Amip => amip_audit(data, &query()),
                SimMethod::OneGreedy => one_greedy(data, &query()),
                SimMethod::AdversarialOracle => sample.whitened_column(&cfg.direction).and_then(|col| {
                    adversarial_audit(data, &sample.noise, &col, k_max, &cfg.direction, &options)
                }),
                SimMethod::Theory => unreachable!("theory is not a replicate method"),
            };
            (m, trace.map(|t| at_prefixes(&t.delta_path, ks)).map_err(|e| e.to_string()))
        })
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn aggregate(
    cfg: &SimulationConfig,
    ks: &[usize],
    empirical: &[SimMethod],
    outcomes: &[Outcome],
) -> Result<(Vec<CurvePoint>, Vec<ReplicateFailure>)> {
    let mut failures = Vec::new();
    let mut curves = Vec::new();
    for (mi, &m) in empirical.iter().enumerate() {
        let mut ok: Vec<&Vec<f64>> = Vec::new();
        for (r, outcome) in outcomes.iter().enumerate() {
            match &outcome[mi].1 {
                Ok(v) => ok.push(v),
                Err(msg) => failures.push(ReplicateFailure {
                    replicate: r,
                    method: m,
                    message: msg.clone(),
                }),
            }
        }
        let failed = outcomes.len() - ok.len();
        if failed as f64 > cfg.max_failure_rate * outcomes.len() as f64 {
            return Err(Error::TooManyFailures {
                failed,
                total: outcomes.len(),
            });
        }
        for (ai, (&alpha, &k)) in cfg.alphas.iter().zip(ks).enumerate() {
            let values: Vec<f64> = ok.iter().map(|v| v[ai]).collect();
            let (mean, sd) = mean_sd(&values);
            curves.push(CurvePoint {
                alpha,
                k,
                method: m,
                mean,
                sd,
                n_ok: values.len(),
            });
        }
    }
    Ok((curves, failures))
}

/// Theory curve for a Model 2 config, straight from [`asymptotic_lower_bound`].
pub fn theory_curve(cfg: &SimulationConfig, spec: &ModelSpec) -> Result<Vec<TheoryPoint>> {
    let w = factor_spd(&spec.sigma)?.forward(&cfg.direction)?;
    let scale = spec.noise_scale * euclid_norm(&w);
    cfg.alphas
        .iter()
        .zip(cfg.ks())
        .map(|(&alpha, k)| {
            let value = asymptotic_lower_bound(alpha, scale, &spec.noise)?.value;
            let gamma = BoundParams::new(cfg.n, cfg.p, k)?.gamma;
            Ok(TheoryPoint {
                alpha,
                k,
                value,
                value_with_gamma_factor: (1.0 - gamma) * value,
            })
        })
        .collect()
}

/// Runs the Fig. 1 experiment: each replicate audits one dataset once with
/// the largest `k` and reads every smaller `k` off the removal prefix.
pub fn run_figure1(cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    let ks = cfg.ks();
    let mut methods: Vec<SimMethod> = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let empirical: Vec<SimMethod> = methods.iter().copied().filter(|&m| m != SimMethod::Theory).collect();
    let seeds: Vec<u64> = (0..cfg.replicates)
        .map(|r| split_seed(cfg.master_seed, r as u64, DATA_STREAM))
        .collect();
    let outcomes: Vec<Outcome> = seeds
        .par_iter()
        .map(|&seed| run_replicate(cfg, seed, &ks, &empirical))
        .collect();

    let (curves, failures) = aggregate(cfg, &ks, &empirical, &outcomes)?;
    let theory = match (&cfg.model, methods.contains(&SimMethod::Theory)) {
        (SimModel::Model2(spec), true) => theory_curve(cfg, spec)?,
        _ => Vec::new(),
    };
    Ok(SimulationResult {
        config: cfg.clone(),
        seeds,
        curves,
        theory,
        failures,
        metadata: SimulationMetadata {
            seed_derivation: format!(
                "ChaCha8(seed_from_u64(master_seed)).set_stream(replicate << 16 | {DATA_STREAM}).next_u64()"
            ),
            sd_convention: "sample sd of per-dataset values, divisor N-1".into(),
            k_rounding: "k = round(alpha * n), ties to even".into(),
            absent_series: vec!["acre_upper".into()],
        },
    })
}

/// Flat table `alpha,method,mean,sd,n_ok`; theory rows carry `sd = 0` and
/// `n_ok = 1`, plus a `theory_gamma` row for the `(1-γ)`-scaled curve.
pub fn plot_table(result: &SimulationResult) -> String {
    let mut out = String::from("alpha,method,mean,sd,n_ok\n");
    for c in &result.curves {
        out.push_str(&format!("{},{},{},{},{}\n", c.alpha, c.method.name(), c.mean, c.sd, c.n_ok));
    }
    for t in &result.theory {
        out.push_str(&format!("{},theory,{},0,1\n", t.alpha, t.value));
        out.push_str(&format!("{},theory_gamma,{},0,1\n", t.alpha, t.value_with_gamma_factor));
    }
    out
}
