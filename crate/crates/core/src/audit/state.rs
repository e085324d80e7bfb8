//! Least-squares fit on a shrinking row set, maintained by rank-one downdates.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{factor_spd, Matrix};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone)]
pub(crate) struct SubsetOls<T> {
    active: Vec<bool>,
    remaining: usize,
    gram_inverse: Matrix<T>,
    beta: Vec<T>,
    since_refresh: usize,
    tolerance: T,
    refresh_every: usize,
}

impl<T: Scalar> SubsetOls<T> {
    pub fn new(data: &Dataset<T>, tolerance: f64, refresh_every: usize) -> Result<Self> {
        let mut state = Self {
            active: vec![true; data.n()],
            remaining: data.n(),
            gram_inverse: Matrix::zeros(0, 0),
            beta: Vec::new(),
            since_refresh: 0,
            tolerance: T::lit(tolerance),
            refresh_every: refresh_every.max(1),
        };
        state.refresh(data)?;
        Ok(state)
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn gram_inverse(&self) -> &Matrix<T> {
        &self.gram_inverse
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn active_rows(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    fn refresh(&mut self, data: &Dataset<T>) -> Result<()> {
        let rows = self.active_rows();
        let factor = factor_spd(&data.design().gram(&rows, None)).map_err(|_| Error::RankDeficient)?;
        self.beta = factor.solve(&data.design().cross(&rows, data.response(), None))?;
        self.gram_inverse = factor.inverse();
        self.since_refresh = 0;
        Ok(())
    }

    /// Exact effect of deleting active row `i` on `dᵀβ`, given `w = G⁻¹d`:
    /// `wᵀxᵢ · rᵢ / (1 - hᵢ)`. `None` when the row is pivotal.
    pub fn removal_effect(&self, data: &Dataset<T>, i: usize, w: &[T]) -> Option<T> {
        let x = data.row(i);
        let h = self.gram_inverse.quad_form(x);
        let denom = T::one() - h;
        if !(denom > self.tolerance) {
            return None;
        }
        let r = data.response()[i] - dot(x, &self.beta);
        Some(dot(w, x) * r / denom)
    }

    /// Deletes active row `i` and updates `G⁻¹` and `β` in O(p²).
    pub fn remove(&mut self, data: &Dataset<T>, i: usize) -> Result<()> {
        if !self.active[i] {
            return Err(Error::invalid(format!("row {i} already removed")));
        }
        let x = data.row(i);
        let u = self.gram_inverse.mul_vec(x)?;
        let denom = T::one() - dot(x, &u);
        if !(denom > self.tolerance) {
            return Err(Error::RankCollapse {
                row: Some(i),
                denominator: denom.as_f64(),
            });
        }
        let r = data.response()[i] - dot(x, &self.beta);
        let step = r / denom;
        for (b, &uj) in self.beta.iter_mut().zip(&u) {
            *b = *b - uj * step;
        }
        let p = u.len();
        for a in 0..p {
            let s = u[a] / denom;
            let row = self.gram_inverse.row_mut(a);
            for (g, &ub) in row.iter_mut().zip(&u) {
                *g = *g + s * ub;
            }
        }
        self.active[i] = false;
        self.remaining -= 1;
        self.since_refresh += 1;
        if self.since_refresh >= self.refresh_every {
            self.refresh(data)?;
        }
        Ok(())
    }
}
