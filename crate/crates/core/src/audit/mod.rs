//! Lower bounds and exact values of `Δ_k(v) = max_{|S| = n-k} vᵀ(β̂ - β̂_S)`.
//!
//! Every method returns an [`AuditTrace`] whose `delta_path` holds exact refit
//! deltas of the chosen removal prefixes, so each entry is a certified lower
//! bound on `Δ_j(v)` for its prefix length `j`.

mod adversarial;
mod amip;
mod brute;
mod greedy;
mod state;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::regression::{HuberConfig, Loss};
use crate::scalar::{euclid_norm, Scalar};

pub use adversarial::{adversarial_audit, adversarial_subset};
pub use amip::amip_audit;
pub use brute::{brute_force_delta, subset_count};
pub use greedy::one_greedy;

/// Default cap on the number of subsets brute force may enumerate.
pub const ENUMERATION_BUDGET: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Push `vᵀβ̂_S` down as far as possible for `k_max` removals.
    MaximizeDelta,
    /// Stop at the first prefix where `vᵀβ̂_S` has the opposite sign of `vᵀβ̂`.
    /// The direction is re-signed so that `vᵀβ̂ > 0` before auditing.
    FlipSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OneGreedy,
    Amip,
    BruteForce,
    AdversarialOracle,
}

/// Tuning knobs shared by the audit methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    /// Floor on the Sherman–Morrison denominator.
    pub downdate_tolerance: f64,
    /// Recompute the subset inverse from scratch after this many downdates.
    pub refresh_every: usize,
    /// IRLS iteration cap and tolerance for Huber audits (`tau` comes from the loss).
    pub huber_max_iterations: usize,
    pub huber_tolerance: f64,
    /// Huber greedy: only refit the top-m rows by previous-step effect.
    /// `None` refits every remaining row.
    pub candidate_limit: Option<usize>,
    pub enumeration_budget: u128,
}

impl Default for AuditOptions {
    fn default() -> Self {
        let huber = HuberConfig::default();
        Self {
            downdate_tolerance: crate::linalg::DOWNDATE_TOLERANCE,
            refresh_every: 32,
            huber_max_iterations: huber.max_iterations,
            huber_tolerance: huber.tolerance,
            candidate_limit: None,
            enumeration_budget: ENUMERATION_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditQuery<T> {
    pub direction: Vec<T>,
    pub k_max: usize,
    pub target: Target,
    pub loss: Loss,
    #[serde(default)]
    pub options: AuditOptions,
}

impl<T: Scalar> AuditQuery<T> {
    pub fn new(direction: Vec<T>, k_max: usize, target: Target, loss: Loss) -> Self {
        Self {
            direction,
            k_max,
            target,
            loss,
            options: AuditOptions::default(),
        }
    }

    /// Audit of coordinate `j` of a `p`-dimensional fit.
    pub fn coordinate(j: usize, p: usize, k_max: usize, target: Target, loss: Loss) -> Self {
        let mut v = vec![T::zero(); p];
        if j < p {
            v[j] = T::one();
        }
        Self::new(v, k_max, target, loss)
    }

    pub fn with_options(mut self, options: AuditOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self, data: &Dataset<T>) -> Result<()> {
        if self.direction.len() != data.p() {
            return Err(Error::DimensionMismatch {
                what: "audit direction",
                expected: data.p(),
                found: self.direction.len(),
            });
        }
        if !(euclid_norm(&self.direction) > T::zero()) {
            return Err(Error::invalid("audit direction must be non-zero"));
        }
        if self.k_max > data.n() - data.p() {
            return Err(Error::invalid(format!(
                "k_max = {} exceeds n - p = {}",
                self.k_max,
                data.n() - data.p()
            )));
        }
        if let Loss::Huber { tau } = self.loss {
            self.huber_config(tau).validate()?;
        }
        Ok(())
    }

    pub(crate) fn huber_config(&self, tau: f64) -> HuberConfig {
        HuberConfig {
            tau,
            max_iterations: self.options.huber_max_iterations,
            tolerance: self.options.huber_tolerance,
        }
    }
}

/// Ordered removals with the exact coefficient change after each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTrace<T> {
    pub method: Method,
    /// Direction actually audited (re-signed for [`Target::FlipSign`]).
    pub direction: Vec<T>,
    /// `vᵀβ̂` on all rows.
    pub base_value: T,
    pub removed: Vec<usize>,
    /// `vᵀ(β̂ - β̂_S)` after each removal.
    pub delta_path: Vec<T>,
    /// First prefix length at which `vᵀβ̂_S` has the opposite sign of `vᵀβ̂`.
    pub flip_at: Option<usize>,
    pub achieved_delta: T,
    /// Brute force only: subsets enumerated and subsets skipped for rank loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumerated: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_collapse_skipped: Option<u64>,
}

impl<T: Scalar> AuditTrace<T> {
    pub(crate) fn new(method: Method, direction: Vec<T>, base_value: T) -> Self {
        Self {
            method,
            direction,
            base_value,
            removed: Vec::new(),
            delta_path: Vec::new(),
            flip_at: None,
            achieved_delta: T::zero(),
            enumerated: None,
            rank_collapse_skipped: None,
        }
    }

    pub(crate) fn push(&mut self, row: usize, delta: T) {
        self.removed.push(row);
        self.delta_path.push(delta);
        self.achieved_delta = delta;
        if self.flip_at.is_none() && flips(self.base_value, delta) {
            self.flip_at = Some(self.removed.len());
        }
    }

    /// `vᵀβ̂_S` after the first `j` removals.
    pub fn value_after(&self, j: usize) -> T {
        if j == 0 {
            self.base_value
        } else {
            self.base_value - self.delta_path[j - 1]
        }
    }
}

/// Whether `base - delta` has the opposite (strict) sign of `base`.
pub(crate) fn flips<T: Scalar>(base: T, delta: T) -> bool {
    let after = base - delta;
    (base > T::zero() && after < T::zero()) || (base < T::zero() && after > T::zero())
}

/// Direction to audit: `v`, or `sign(vᵀβ̂)·v` for flip targets.
pub(crate) fn effective_direction<T: Scalar>(q: &AuditQuery<T>, coefficients: &[T]) -> Vec<T> {
    let base = crate::scalar::dot(coefficients, &q.direction);
    match q.target {
        Target::FlipSign if base < T::zero() => q.direction.iter().map(|&v| -v).collect(),
        _ => q.direction.clone(),
    }
}

/// Deterministic arg-max: largest value, ties to the lowest key.
pub(crate) fn better<T: Scalar>(a: Option<(T, usize)>, b: (T, usize)) -> Option<(T, usize)> {
    match a {
        None => Some(b),
        Some(cur) => {
            if b.0 > cur.0 || (b.0 == cur.0 && b.1 < cur.1) {
                Some(b)
            } else {
                Some(cur)
            }
        }
    }
}
