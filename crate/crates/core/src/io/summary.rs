use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Deviation thresholds, in multiples of `σ_y`, for the outlier counts.
pub const OUTLIER_MULTIPLES: [f64; 2] = [5.0, 10.0];

/// Response-distribution summary, optionally with stats of a removal set.
///
/// `σ_y` divides by `n`. A row counts as an outlier at `c` when
/// `|y - μ_y| ≥ c·σ_y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mu_y: f64,
    pub sigma_y: f64,
    pub count_gt5sigma: usize,
    pub count_gt10sigma: usize,
    /// `σ_y = 0`; the counts are then 0.
    pub degenerate_sigma: bool,
    pub removed_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_mean_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_max_y: Option<f64>,
    /// `(max_removed y - μ_y)/σ_y`; absent when `σ_y = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_max_y_in_sigmas: Option<f64>,
    pub sd_convention: String,
    pub outlier_comparison: String,
}

pub fn summarize<T: Scalar>(data: &Dataset<T>, removal: Option<&[usize]>) -> Result<SummaryStats> {
    let y: Vec<f64> = data.response().iter().map(|v| v.as_f64()).collect();
    let n = y.len();
    if n == 0 {
        return Err(Error::invalid("summary needs at least one row"));
    }
    let removal = removal.unwrap_or(&[]);
    data.check_rows(removal)?;
    let mu = y.iter().sum::<f64>() / n as f64;
    let sigma = (y.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64).sqrt();
    let degenerate = sigma == 0.0;
    let count = |c: f64| {
        if degenerate {
            0
        } else {
            y.iter().filter(|&&v| (v - mu).abs() >= c * sigma).count()
        }
    };
    let removed: Vec<f64> = removal.iter().map(|&i| y[i]).collect();
    let removed_max = removed.iter().copied().reduce(f64::max);
    Ok(SummaryStats {
        n,
        mu_y: mu,
        sigma_y: sigma,
        count_gt5sigma: count(OUTLIER_MULTIPLES[0]),
        count_gt10sigma: count(OUTLIER_MULTIPLES[1]),
        degenerate_sigma: degenerate,
        removed_count: removed.len(),
        removed_mean_y: (!removed.is_empty()).then(|| removed.iter().sum::<f64>() / removed.len() as f64),
        removed_max_y: removed_max,
        removed_max_y_in_sigmas: removed_max.filter(|_| !degenerate).map(|m| (m - mu) / sigma),
        sd_convention: "population (divisor n)".into(),
        outlier_comparison: ">=".into(),
    })
}
