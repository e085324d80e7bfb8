use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::regression::fit_ols;
use crate::scalar::{dot, Scalar};

use super::state::SubsetOls;
use super::{AuditOptions, AuditTrace, Method};

fn ranked_by_product<T: Scalar>(noise: &[T], column: &[T]) -> Result<Vec<usize>> {
    if noise.len() != column.len() {
        return Err(Error::DimensionMismatch {
            what: "noise vs whitened column",
            expected: noise.len(),
            found: column.len(),
        });
    }
    let products: Vec<T> = noise.iter().zip(column).map(|(&e, &z)| e * z).collect();
    let mut order: Vec<usize> = (0..noise.len()).collect();
    // descending product, ties to the lower index
    order.sort_by(|&a, &b| {
        products[b]
            .partial_cmp(&products[a])
            .expect("finite products")
            .then(a.cmp(&b))
    });
    Ok(order)
}

/// Keeps the `n - k` rows with the smallest `εᵢ·zᵢ₁`; returns the kept
/// indices in ascending order.
///
/// Needs the true noise, so it is a simulation-only oracle.
pub fn adversarial_subset<T: Scalar>(noise: &[T], first_column: &[T], k: usize) -> Result<Vec<usize>> {
    let n = noise.len();
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let order = ranked_by_product(noise, first_column)?;
    let mut kept = order[k..].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Removes the `k` rows with the largest `εᵢ·zᵢ₁` (largest first) and
/// records the exact refit delta in `direction` after each removal.
pub fn adversarial_audit<T: Scalar>(
    data: &Dataset<T>,
    noise: &[T],
    first_column: &[T],
    k: usize,
    direction: &[T],
    options: &AuditOptions,
) -> Result<AuditTrace<T>> {
    if noise.len() != data.n() {
        return Err(Error::DimensionMismatch {
            what: "noise vector",
            expected: data.n(),
            found: noise.len(),
        });
    }
    if k > data.n() - data.p() {
        return Err(Error::invalid(format!("k = {k} exceeds n - p")));
    }
    let order = ranked_by_product(noise, first_column)?;
    let fit = fit_ols(data, &data.all_rows())?;
    let base = dot(&fit.coefficients, direction);
    let mut trace = AuditTrace::new(Method::AdversarialOracle, direction.to_vec(), base);
    let mut state = SubsetOls::new(data, options.downdate_tolerance, options.refresh_every)?;
    for &row in order.iter().take(k) {
        state.remove(data, row)?;
        trace.push(row, base - dot(state.beta(), direction));
    }
    Ok(trace)
}
