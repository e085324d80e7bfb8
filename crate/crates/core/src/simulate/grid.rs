use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::adversarial_subset;
use crate::bounds::{asymptotic_lower_bound, classify_regime, ModelSpec, NoiseDist, Region, REGIME_CUTOFF};
use crate::error::{Error, Result};
use crate::linalg::factor_spd;
use crate::scalar::euclid_norm;

use super::generate::{gen_model2, split_seed};

/// A Δ drop of at least this fraction from the smallest to the largest `n`
/// counts as "robust".
pub const ROBUST_DROP: f64 = 0.3;
/// An error drop of at least this fraction counts as "consistent".
pub const CONSISTENT_DROP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthRule {
    /// `⌈√n⌉`
    Sqrt,
    /// `⌈n/4⌉`
    Quarter,
}

impl GrowthRule {
    pub fn apply(self, n: usize) -> usize {
        match self {
            GrowthRule::Sqrt => (n as f64).sqrt().ceil() as usize,
            GrowthRule::Quarter => n.div_ceil(4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioSetting {
    pub k: GrowthRule,
    pub p: GrowthRule,
}

impl RatioSetting {
    pub fn region(self) -> Region {
        match (self.k, self.p) {
            (GrowthRule::Sqrt, GrowthRule::Sqrt) => Region::I,
            (GrowthRule::Sqrt, GrowthRule::Quarter) => Region::II,
            (GrowthRule::Quarter, GrowthRule::Sqrt) => Region::III,
            (GrowthRule::Quarter, GrowthRule::Quarter) => Region::IV,
        }
    }

    /// One setting per region, I to IV.
    pub fn table1() -> Vec<RatioSetting> {
        use GrowthRule::*;
        vec![
            RatioSetting { k: Sqrt, p: Sqrt },
            RatioSetting { k: Sqrt, p: Quarter },
            RatioSetting { k: Quarter, p: Sqrt },
            RatioSetting { k: Quarter, p: Quarter },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_list: Vec<usize>,
    pub settings: Vec<RatioSetting>,
    pub noise: NoiseDist,
    pub noise_scale: f64,
    pub seeds: usize,
    pub master_seed: u64,
}

impl GridConfig {
    pub fn table1(seeds: usize, master_seed: u64) -> Self {
        Self {
            n_list: vec![200, 800, 3200],
            settings: RatioSetting::table1(),
            noise: NoiseDist::Gaussian,
            noise_scale: 1.0,
            seeds,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.n_list.is_empty() || self.settings.is_empty() {
            return Err(Error::invalid("grid needs at least one n, setting and seed"));
        }
        if self.settings.len() * self.n_list.len() > u16::MAX as usize {
            return Err(Error::invalid("too many grid cells"));
        }
        self.noise.validate()?;
        for s in &self.settings {
            for &n in &self.n_list {
                let (k, p) = (s.k.apply(n), s.p.apply(n));
                if n < 2 || k + p > n {
                    return Err(Error::invalid(format!("n = {n} too small for k = {k}, p = {p}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub region: Region,
    /// What `classify_regime` says about this `(n, k, p)` at the default cutoff.
    pub classified: Region,
    pub n: usize,
    pub k: usize,
    pub p: usize,
    /// Mean and sample sd over seeds of `β̂₁ - β̂_{S,1}` for the adversarial subset.
    pub mean_delta: f64,
    pub sd_delta: f64,
    /// Mean `‖β̂ - β‖` on all rows.
    pub mean_full_error: f64,
    /// Mean `‖β̂_S - β‖` on the adversarial subset.
    pub mean_subset_error: f64,
    /// Asymptotic lower bound at `α = k/n`.
    pub asymptotic_lb: f64,
    pub n_ok: usize,
}

/// How a region's cells move from the smallest to the largest `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTrend {
    pub region: Region,
    pub delta_ratio: f64,
    pub full_error_ratio: f64,
    pub subset_error_ratio: f64,
    pub robust_observed: bool,
    pub consistent_observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeGrid {
    pub config: GridConfig,
    pub cells: Vec<GridCell>,
    pub trends: Vec<RegionTrend>,
}

impl RegimeGrid {
    pub fn cells_for(&self, region: Region) -> Vec<&GridCell> {
        self.cells.iter().filter(|c| c.region == region).collect()
    }
}

struct SeedOutcome {
    delta: f64,
    full_error: f64,
    subset_error: f64,
}

fn one_seed(spec: &ModelSpec, n: usize, k: usize, seed: u64) -> Result<SeedOutcome> {
    let sample = gen_model2(spec, n, seed)?;
    let data = &sample.data;
    let p = data.p();
    let column = data.design().column(0);
    let kept = adversarial_subset(&sample.noise, &column, k)?;
    let mut removed = vec![true; n];
    for &i in &kept {
        removed[i] = false;
    }
    let removed: Vec<usize> = (0..n).filter(|&i| removed[i]).collect();
    let design = data.design();
    let y = data.response();
    let gram = design.gram(&data.all_rows(), None);
    let cross = design.cross(&data.all_rows(), y, None);
    let full = factor_spd(&gram)?.solve(&cross)?;
    // subset normal equations by subtracting the removed rows
    let removed_gram = design.gram(&removed, None);
    let removed_cross = design.cross(&removed, y, None);
    let mut sub_gram = gram;
    for a in 0..p {
        for b in 0..p {
            sub_gram[(a, b)] -= removed_gram[(a, b)];
        }
    }
    let sub_cross: Vec<f64> = cross.iter().zip(&removed_cross).map(|(a, b)| a - b).collect();
    let subset = factor_spd(&sub_gram)?.solve(&sub_cross)?;
    let err = |b: &[f64]| euclid_norm(&b.iter().zip(&spec.beta).map(|(x, t)| x - t).collect::<Vec<_>>());
    Ok(SeedOutcome {
        delta: full[0] - subset[0],
        full_error: err(&full),
        subset_error: err(&subset),
    })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    s / c as f64
}

/// Adversarial-oracle Δ and estimation error for each `(setting, n)` cell of
/// the Table 1 grid, with `Σ = I`, `β = 0`, `v = e₁`.
pub fn run_regime_grid(cfg: &GridConfig) -> Result<RegimeGrid> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut trends = Vec::new();
    for (si, setting) in cfg.settings.iter().enumerate() {
        let region = setting.region();
        let mut region_cells = Vec::new();
        for (ni, &n) in cfg.n_list.iter().enumerate() {
            let (k, p) = (setting.k.apply(n), setting.p.apply(n));
            let spec = ModelSpec {
                noise: cfg.noise,
                noise_scale: cfg.noise_scale,
                ..ModelSpec::isotropic(p)
            };
            let stream = 1 + (si * cfg.n_list.len() + ni) as u16;
            let outcomes: Vec<Result<SeedOutcome>> = (0..cfg.seeds)
                .into_par_iter()
                .map(|s| one_seed(&spec, n, k, split_seed(cfg.master_seed, s as u64, stream)))
                .collect();
            let ok: Vec<SeedOutcome> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
            if ok.is_empty() {
                return Err(Error::TooManyFailures {
                    failed: cfg.seeds,
                    total: cfg.seeds,
                });
            }
            let mean_delta = mean(ok.iter().map(|o| o.delta));
            let sd_delta = if ok.len() > 1 {
                (ok.iter().map(|o| (o.delta - mean_delta).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            let alpha = k as f64 / n as f64;
            let asymptotic_lb = asymptotic_lower_bound(alpha, cfg.noise_scale, &cfg.noise)?.value;
            region_cells.push(GridCell {
                region,
                classified: classify_regime(n, k, p, REGIME_CUTOFF),
                n,
                k,
                p,
                mean_delta,
                sd_delta,
                mean_full_error: mean(ok.iter().map(|o| o.full_error)),
                mean_subset_error: mean(ok.iter().map(|o| o.subset_error)),
                asymptotic_lb,
                n_ok: ok.len(),
            });
        }
        let (first, last) = (&region_cells[0], &region_cells[region_cells.len() - 1]);
        let delta_ratio = last.mean_delta / first.mean_delta;
        let full_error_ratio = last.mean_full_error / first.mean_full_error;
        trends.push(RegionTrend {
            region,
            delta_ratio,
            full_error_ratio,
            subset_error_ratio: last.mean_subset_error / first.mean_subset_error,
            robust_observed: delta_ratio <= 1.0 - ROBUST_DROP,
            consistent_observed: full_error_ratio <= 1.0 - CONSISTENT_DROP,
        });
        cells.extend(region_cells);
    }
    Ok(RegimeGrid {
        config: cfg.clone(),
        cells,
        trends,
    })
}
