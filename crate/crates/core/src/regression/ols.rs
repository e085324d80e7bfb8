use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{factor_spd, SpdFactor};
use crate::scalar::{dot, Scalar};

use super::{check_direction, check_fit_rows, Loss, RegressionFit, PIVOT_TOLERANCE};

fn factor_rows<T: Scalar>(data: &Dataset<T>, rows: &[usize]) -> Result<SpdFactor<T>> {
    check_fit_rows(data, rows)?;
    let gram = data.design().gram(rows, None);
    factor_spd(&gram).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::RankDeficient,
        other => other,
    })
}

/// Least-squares coefficients on `rows` without the per-row diagnostics.
pub fn ols_coefficients<T: Scalar>(data: &Dataset<T>, rows: &[usize]) -> Result<Vec<T>> {
    let factor = factor_rows(data, rows)?;
    factor.solve(&data.design().cross(rows, data.response(), None))
}

/// Least-squares fit on the row subset `rows`.
pub fn fit_ols<T: Scalar>(data: &Dataset<T>, rows: &[usize]) -> Result<RegressionFit<T>> {
    let factor = factor_rows(data, rows)?;
    let coefficients = factor.solve(&data.design().cross(rows, data.response(), None))?;
    let y = data.response();
    let mut residuals = Vec::with_capacity(rows.len());
    let mut leverages = Vec::with_capacity(rows.len());
    for &i in rows {
        let x = data.row(i);
        residuals.push(y[i] - dot(x, &coefficients));
        let z = factor.forward(x)?;
        leverages.push(dot(&z, &z));
    }
    Ok(RegressionFit {
        coefficients,
        gram_inverse: factor.inverse(),
        residuals,
        leverages,
        active_rows: rows.to_vec(),
        loss: Loss::Squared,
        condition_log: factor.log_condition(),
        iterations: 0,
        weights: None,
    })
}

fn require_squared<T: Scalar>(fit: &RegressionFit<T>) -> Result<()> {
    if fit.loss != Loss::Squared {
        return Err(Error::invalid(
            "leave-one-out identities require a least-squares fit",
        ));
    }
    Ok(())
}

/// Exact change in `vᵀβ̂` from deleting each active row on its own:
/// `vᵀ(β̂ - β̂₋ᵢ) = vᵀG⁻¹xᵢ · rᵢ / (1 - hᵢ)`.
pub fn loo_effects<T: Scalar>(
    fit: &RegressionFit<T>,
    data: &Dataset<T>,
    direction: &[T],
) -> Result<Vec<T>> {
    require_squared(fit)?;
    check_direction(direction, fit.p())?;
    let u = fit.gram_inverse.mul_vec(direction)?;
    let limit = T::one() - T::lit(PIVOT_TOLERANCE);
    fit.active_rows
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let h = fit.leverages[k];
            if h >= limit {
                return Err(Error::PivotalRow {
                    row: i,
                    leverage: h.as_f64(),
                });
            }
            Ok(dot(&u, data.row(i)) * fit.residuals[k] / (T::one() - h))
        })
        .collect()
}

/// First-order influence `vᵀG⁻¹xᵢ · rᵢ` of each active row (no leverage
/// correction). Ranking rows by this is the AMIP heuristic.
pub fn influence_scores<T: Scalar>(
    fit: &RegressionFit<T>,
    data: &Dataset<T>,
    direction: &[T],
) -> Result<Vec<T>> {
    require_squared(fit)?;
    check_direction(direction, fit.p())?;
    let u = fit.gram_inverse.mul_vec(direction)?;
    Ok(fit
        .active_rows
        .iter()
        .zip(&fit.residuals)
        .map(|(&i, &r)| dot(&u, data.row(i)) * r)
        .collect())
}
