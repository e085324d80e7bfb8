use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::factor_spd;
use crate::scalar::{dot, sup_norm, Scalar};

use super::{check_fit_rows, ols_coefficients, HuberConfig, Loss, RegressionFit};

/// Huber loss `h_τ(z)`: `z²/2` for `|z| ≤ τ`, `τ(|z| - τ/2)` beyond.
pub fn huber_loss<T: Scalar>(z: T, tau: T) -> T {
    let a = z.abs();
    if a <= tau {
        z * z / T::lit(2.0)
    } else {
        tau * (a - tau / T::lit(2.0))
    }
}

/// Clipped residual `ψ_τ(z) = clamp(z, -τ, τ)`.
pub fn huber_score<T: Scalar>(z: T, tau: T) -> T {
    z.max(-tau).min(tau)
}

/// `Σ_{i∈rows} ψ_τ(yᵢ - xᵢᵀβ) xᵢ`; zero at a Huber stationary point.
pub fn huber_gradient<T: Scalar>(data: &Dataset<T>, rows: &[usize], beta: &[T], tau: T) -> Vec<T> {
    let mut g = vec![T::zero(); data.p()];
    for &i in rows {
        let x = data.row(i);
        let psi = huber_score(data.response()[i] - dot(x, beta), tau);
        for (gj, &xj) in g.iter_mut().zip(x) {
            *gj = *gj + psi * xj;
        }
    }
    g
}

fn irls_weights<T: Scalar>(data: &Dataset<T>, rows: &[usize], beta: &[T], tau: T, out: &mut Vec<T>) {
    out.clear();
    out.extend(rows.iter().map(|&i| {
        let r = (data.response()[i] - dot(data.row(i), beta)).abs();
        if r <= tau {
            T::one()
        } else {
            tau / r
        }
    }));
}

/// Huber coefficients by IRLS, optionally warm-started. Returns the
/// coefficients and the iteration count.
pub fn huber_coefficients<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    cfg: &HuberConfig,
    warm: Option<&[T]>,
) -> Result<(Vec<T>, usize)> {
    cfg.validate()?;
    check_fit_rows(data, rows)?;
    let tau = T::lit(cfg.tau);
    let tol = T::lit(cfg.tolerance);
    let mut beta = match warm {
        Some(b) if b.len() == data.p() => b.to_vec(),
        Some(b) => {
            return Err(Error::DimensionMismatch {
                what: "warm start",
                expected: data.p(),
                found: b.len(),
            })
        }
        None => ols_coefficients(data, rows)?,
    };
    let mut weights = Vec::with_capacity(rows.len());
    for iteration in 1..=cfg.max_iterations {
        irls_weights(data, rows, &beta, tau, &mut weights);
        let gram = data.design().gram(rows, Some(&weights));
        let factor = factor_spd(&gram).map_err(|_| Error::RankDeficient)?;
        let next = factor.solve(&data.design().cross(rows, data.response(), Some(&weights)))?;
        let change = beta
            .iter()
            .zip(&next)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        beta = next;
        if change <= tol * (T::one() + sup_norm(&beta)) {
            return Ok((beta, iteration));
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
    })
}

/// Huber-loss fit on `rows` with full diagnostics.
pub fn fit_huber<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    cfg: &HuberConfig,
) -> Result<RegressionFit<T>> {
    let (coefficients, iterations) = huber_coefficients(data, rows, cfg, None)?;
    let tau = T::lit(cfg.tau);
    let gram = data.design().gram(rows, None);
    let factor = factor_spd(&gram).map_err(|_| Error::RankDeficient)?;
    let mut residuals = Vec::with_capacity(rows.len());
    let mut leverages = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for &i in rows {
        let x = data.row(i);
        let r = data.response()[i] - dot(x, &coefficients);
        residuals.push(r);
        weights.push(if r.abs() <= tau { T::one() } else { tau / r.abs() });
        let z = factor.forward(x)?;
        leverages.push(dot(&z, &z));
    }
    Ok(RegressionFit {
        coefficients,
        gram_inverse: factor.inverse(),
        residuals,
        leverages,
        active_rows: rows.to_vec(),
        loss: Loss::Huber { tau: cfg.tau },
        condition_log: factor.log_condition(),
        iterations,
        weights: Some(weights),
    })
}
