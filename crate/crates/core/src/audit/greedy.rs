use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::regression::{huber_coefficients, Loss};
use crate::scalar::{dot, Scalar};

use super::state::SubsetOls;
use super::{better, effective_direction, AuditQuery, AuditTrace, Method, Target};

/// Below this many candidates a greedy step is evaluated on one thread.
const PARALLEL_MIN_CANDIDATES: usize = 64;

/// 1-Greedy: at each step delete the single remaining row whose exact
/// removal moves `vᵀβ̂_S` furthest down, until the sign flips (flip target)
/// or `k_max` rows are gone.
///
/// A step always removes a row, even when no deletion helps. Ties go to the
/// lowest row index.
pub fn one_greedy<T: Scalar>(data: &Dataset<T>, q: &AuditQuery<T>) -> Result<AuditTrace<T>> {
    q.validate(data)?;
    match q.loss {
        Loss::Squared => greedy_squared(data, q),
        Loss::Huber { tau } => greedy_huber(data, q, tau),
    }
}

fn done<T: Scalar>(q: &AuditQuery<T>, trace: &AuditTrace<T>) -> bool {
    trace.removed.len() >= q.k_max
        || (q.target == Target::FlipSign
            && (trace.flip_at.is_some() || trace.base_value == T::zero()))
}

fn greedy_squared<T: Scalar>(data: &Dataset<T>, q: &AuditQuery<T>) -> Result<AuditTrace<T>> {
    let mut state = SubsetOls::new(data, q.options.downdate_tolerance, q.options.refresh_every)?;
    let direction = effective_direction(q, state.beta());
    let base = dot(state.beta(), &direction);
    let mut trace = AuditTrace::new(Method::OneGreedy, direction, base);
    while !done(q, &trace) {
        let w = state.gram_inverse().mul_vec(&trace.direction)?;
        let eval = |i: usize| -> Option<(T, usize)> {
            if !state.is_active(i) {
                return None;
            }
            state.removal_effect(data, i, &w).map(|e| (e, i))
        };
        let best = if state.remaining() < PARALLEL_MIN_CANDIDATES {
            (0..data.n()).filter_map(eval).fold(None, better)
        } else {
            let scored: Vec<(T, usize)> = (0..data.n()).into_par_iter().filter_map(eval).collect();
            scored.into_iter().fold(None, better)
        };
        let (_, row) = best.ok_or(Error::RankCollapse {
            row: None,
            denominator: 0.0,
        })?;
        state.remove(data, row)?;
        let delta = base - dot(state.beta(), &trace.direction);
        trace.push(row, delta);
    }
    Ok(trace)
}

fn greedy_huber<T: Scalar>(data: &Dataset<T>, q: &AuditQuery<T>, tau: f64) -> Result<AuditTrace<T>> {
    let cfg = q.huber_config(tau);
    let mut active = data.all_rows();
    let (mut beta, _) = huber_coefficients(data, &active, &cfg, None)?;
    let direction = effective_direction(q, &beta);
    let base = dot(&beta, &direction);
    let mut trace = AuditTrace::new(Method::OneGreedy, direction, base);
    // previous-step effect of each row, for candidate pruning
    let mut last_effect: Option<Vec<Option<T>>> = None;

    while !done(q, &trace) {
        let candidates: Vec<usize> = match (q.options.candidate_limit, &last_effect) {
            (Some(m), Some(prev)) if m < active.len() => {
                let mut ranked: Vec<(T, usize)> = active
                    .iter()
                    .map(|&i| (prev[i].unwrap_or(T::neg_infinity()), i))
                    .collect();
                ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
                ranked.into_iter().take(m).map(|(_, i)| i).collect()
            }
            _ => active.clone(),
        };
        let warm = &beta;
        let refit = |&i: &usize| -> Result<Option<(T, usize, Vec<T>)>> {
            let rows: Vec<usize> = active.iter().copied().filter(|&j| j != i).collect();
            match huber_coefficients(data, &rows, &cfg, Some(warm)) {
                Ok((b, _)) => Ok(Some((base - dot(&b, &trace.direction), i, b))),
                Err(Error::RankDeficient) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let results: Vec<Option<(T, usize, Vec<T>)>> = if candidates.len() < PARALLEL_MIN_CANDIDATES / 4 {
            candidates.iter().map(refit).collect::<Result<_>>()?
        } else {
            candidates.par_iter().map(refit).collect::<Result<_>>()?
        };
        let mut effects = vec![None; data.n()];
        let mut best: Option<(T, usize)> = None;
        let mut best_beta = None;
        for (delta, i, b) in results.into_iter().flatten() {
            effects[i] = Some(delta);
            let next = better(best, (delta, i));
            if next != best {
                best = next;
                best_beta = Some(b);
            }
        }
        let (delta, row) = best.ok_or(Error::RankCollapse {
            row: None,
            denominator: 0.0,
        })?;
        beta = best_beta.expect("set with best");
        active.retain(|&j| j != row);
        trace.push(row, delta);
        last_effect = Some(effects);
    }
    Ok(trace)
}
