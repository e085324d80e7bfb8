use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::regression::{fit_ols, influence_scores, Loss};
use crate::scalar::{dot, Scalar};

use super::state::SubsetOls;
use super::{effective_direction, AuditQuery, AuditTrace, Method, Target};

/// AMIP select-and-refit: rank rows once by first-order influence in the
/// audited direction, then delete them in rank order with an exact refit
/// after each deletion.
///
/// Every `delta_path` entry is the exact change for that prefix of the
/// ranking, so `achieved_delta` is a valid lower bound on `Δ_{k_max}(v)`.
pub fn amip_audit<T: Scalar>(data: &Dataset<T>, q: &AuditQuery<T>) -> Result<AuditTrace<T>> {
    q.validate(data)?;
    if q.loss != Loss::Squared {
        return Err(Error::invalid("AMIP audits are defined for least squares only"));
    }
    let rows = data.all_rows();
    let fit = fit_ols(data, &rows)?;
    let direction = effective_direction(q, &fit.coefficients);
    let base = dot(&fit.coefficients, &direction);
    let mut trace = AuditTrace::new(Method::Amip, direction, base);
    if q.k_max == 0 {
        return Ok(trace);
    }
    let scores = influence_scores(&fit, data, &trace.direction)?;
    let mut ranked: Vec<usize> = (0..rows.len()).collect();
    ranked.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(a.cmp(&b))
    });

    let mut state = SubsetOls::new(data, q.options.downdate_tolerance, q.options.refresh_every)?;
    for &row in ranked.iter().take(q.k_max) {
        state.remove(data, row)?;
        let delta = base - dot(state.beta(), &trace.direction);
        trace.push(row, delta);
        if q.target == Target::FlipSign && trace.flip_at.is_some() {
            break;
        }
    }
    Ok(trace)
}
