use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::regression::{fit_ols, Loss};
use crate::scalar::{dot, Scalar};

use super::state::SubsetOls;
use super::{effective_direction, AuditQuery, AuditTrace, Method};

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn subset_count(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Inverse gram and coefficients at one node of the enumeration tree.
struct Node<T> {
    gram_inverse: Matrix<T>,
    beta: Vec<T>,
}

impl<T: Scalar> Node<T> {
    fn without(&self, data: &Dataset<T>, i: usize, tolerance: T) -> Option<Self> {
        let x = data.row(i);
        let u = self.gram_inverse.mul_vec(x).ok()?;
        let denom = T::one() - dot(x, &u);
        if !(denom > tolerance) {
            return None;
        }
        let step = (data.response()[i] - dot(x, &self.beta)) / denom;
        let beta = self.beta.iter().zip(&u).map(|(&b, &uj)| b - uj * step).collect();
        let p = u.len();
        let gram_inverse = Matrix::from_fn(p, p, |a, b| self.gram_inverse[(a, b)] + u[a] * u[b] / denom);
        Some(Self { gram_inverse, beta })
    }
}

#[derive(Default)]
struct Search<T> {
    best: Option<(T, Vec<usize>)>,
    enumerated: u64,
    skipped: u64,
}

impl<T: Scalar> Search<T> {
    fn offer(&mut self, value: T, subset: &[usize]) {
        // strict improvement only: lexicographically first subset wins ties
        if self.best.as_ref().map_or(true, |(b, _)| value > *b) {
            self.best = Some((value, subset.to_vec()));
        }
    }

    fn merge(&mut self, other: Search<T>) {
        self.enumerated += other.enumerated;
        self.skipped += other.skipped;
        if let Some((v, s)) = other.best {
            self.offer(v, &s);
        }
    }
}

struct Ctx<'a, T> {
    data: &'a Dataset<T>,
    direction: &'a [T],
    base: T,
    tolerance: T,
    k: usize,
}

fn descend<T: Scalar>(ctx: &Ctx<'_, T>, node: &Node<T>, start: usize, chosen: &mut Vec<usize>, out: &mut Search<T>) {
    let n = ctx.data.n();
    let left = ctx.k - chosen.len();
    if left == 0 {
        out.enumerated += 1;
        out.offer(ctx.base - dot(&node.beta, ctx.direction), chosen);
        return;
    }
    for i in start..=n - left {
        match node.without(ctx.data, i, ctx.tolerance) {
            Some(child) => {
                chosen.push(i);
                descend(ctx, &child, i + 1, chosen, out);
                chosen.pop();
            }
            None => {
                out.skipped = out
                    .skipped
                    .saturating_add(subset_count(n - i - 1, left - 1).min(u64::MAX as u128) as u64)
            }
        }
    }
}

/// Exact `Δ_k(v)` for `k = q.k_max` by enumerating every removal set of that
/// size with downdate-accelerated refits.
///
/// Sets whose removal would drop the design's rank are skipped and counted
/// in `rank_collapse_skipped`. The returned trace lists the maximizing set in
/// ascending row order; ties go to the lexicographically first set.
pub fn brute_force_delta<T: Scalar>(data: &Dataset<T>, q: &AuditQuery<T>) -> Result<AuditTrace<T>> {
    q.validate(data)?;
    if q.loss != Loss::Squared {
        return Err(Error::invalid("brute-force enumeration is implemented for least squares"));
    }
    let n = data.n();
    let k = q.k_max;
    let subsets = subset_count(n, k);
    if subsets > q.options.enumeration_budget {
        return Err(Error::BudgetExceeded {
            subsets,
            budget: q.options.enumeration_budget,
        });
    }
    let fit = fit_ols(data, &data.all_rows())?;
    let direction = effective_direction(q, &fit.coefficients);
    let base = dot(&fit.coefficients, &direction);
    let mut trace = AuditTrace::new(Method::BruteForce, direction, base);
    if k == 0 {
        trace.enumerated = Some(1);
        trace.rank_collapse_skipped = Some(0);
        return Ok(trace);
    }

    let root = Node {
        gram_inverse: fit.gram_inverse.clone(),
        beta: fit.coefficients.clone(),
    };
    let ctx = Ctx {
        data,
        direction: &trace.direction,
        base,
        tolerance: T::lit(q.options.downdate_tolerance),
        k,
    };
    let branches: Vec<Search<T>> = (0..=n - k)
        .into_par_iter()
        .map(|first| {
            let mut out = Search::default();
            match root.without(data, first, ctx.tolerance) {
                Some(child) => {
                    let mut chosen = vec![first];
                    descend(&ctx, &child, first + 1, &mut chosen, &mut out);
                }
                None => out.skipped = subset_count(n - first - 1, k - 1).min(u64::MAX as u128) as u64,
            }
            out
        })
        .collect();
    let mut total = Search::default();
    for b in branches {
        total.merge(b);
    }
    let (_, subset) = total.best.ok_or(Error::RankCollapse {
        row: None,
        denominator: 0.0,
    })?;

    // replay the winner so every prefix on the path is an exact refit
    let mut state = SubsetOls::new(data, q.options.downdate_tolerance, q.options.refresh_every)?;
    for &row in &subset {
        state.remove(data, row)?;
        let delta = base - dot(state.beta(), &trace.direction);
        trace.push(row, delta);
    }
    trace.enumerated = Some(total.enumerated);
    trace.rank_collapse_skipped = Some(total.skipped);
    Ok(trace)
}
