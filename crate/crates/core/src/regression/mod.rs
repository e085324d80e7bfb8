//! Least-squares and Huber fits on a dataset or any subset of its rows.

mod huber;
mod ols;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use huber::{fit_huber, huber_coefficients, huber_gradient, huber_loss, huber_score};
pub use ols::{fit_ols, influence_scores, loo_effects, ols_coefficients};

/// Leverage at or above `1 - PIVOT_TOLERANCE` marks a row whose removal drops rank.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    Squared,
    Huber { tau: f64 },
}

/// IRLS settings for the Huber fit. `tau` is in response units; responses
/// are never rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberConfig {
    pub tau: f64,
    pub max_iterations: usize,
    /// Stop when the sup-norm coefficient change is below
    /// `tolerance * (1 + |β|∞)`.
    pub tolerance: f64,
}

impl HuberConfig {
    pub fn new(tau: f64) -> Result<Self> {
        let cfg = Self {
            tau,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("huber tau must be positive, got {}", self.tau)));
        }
        if self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::invalid("huber max_iterations and tolerance must be positive"));
        }
        Ok(())
    }
}

impl Default for HuberConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            max_iterations: 200,
            tolerance: 1e-9,
        }
    }
}

/// A fitted linear model on `active_rows`.
///
/// `residuals`, `leverages` and `weights` are parallel to `active_rows`.
/// `gram_inverse` and `leverages` are those of the unweighted design
/// `X_S` for both losses.
#[derive(Debug, Clone)]
pub struct RegressionFit<T> {
    pub coefficients: Vec<T>,
    pub gram_inverse: Matrix<T>,
    pub residuals: Vec<T>,
    pub leverages: Vec<T>,
    pub active_rows: Vec<usize>,
    pub loss: Loss,
    pub condition_log: T,
    /// IRLS iterations; zero for least squares.
    pub iterations: usize,
    /// Final IRLS weights `min(1, τ/|rᵢ|)`; `None` for least squares.
    pub weights: Option<Vec<T>>,
}

impl<T: Scalar> RegressionFit<T> {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    /// `vᵀβ̂`.
    pub fn project(&self, direction: &[T]) -> T {
        crate::scalar::dot(&self.coefficients, direction)
    }
}

pub(crate) fn check_direction<T: Scalar>(direction: &[T], p: usize) -> Result<()> {
    if direction.len() != p {
        return Err(Error::DimensionMismatch {
            what: "direction",
            expected: p,
            found: direction.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_fit_rows<T: Scalar>(data: &crate::Dataset<T>, rows: &[usize]) -> Result<()> {
    data.check_rows(rows)?;
    if rows.len() < data.p() {
        return Err(Error::invalid(format!(
            "{} rows cannot determine {} coefficients",
            rows.len(),
            data.p()
        )));
    }
    Ok(())
}
