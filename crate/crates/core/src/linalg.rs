//! Dense symmetric positive-definite linear algebra.
//!
//! Everything here is sized for regression designs: `p` up to a few hundred,
//! `n` up to tens of thousands of rows. Matrices are row-major.

use std::ops::{Index, IndexMut};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Default lower limit on the Sherman–Morrison denominator `1 - xᵀA⁻¹x`.
pub const DOWNDATE_TOLERANCE: f64 = 1e-10;

/// Dense row-major matrix. Serializes as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<Vec<T>>",
    into = "Vec<Vec<T>>",
    bound = "T: Scalar + Serialize + DeserializeOwned"
)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> TryFrom<Vec<Vec<T>>> for Matrix<T> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl<T: Scalar> From<Matrix<T>> for Vec<Vec<T>> {
    fn from(m: Matrix<T>) -> Self {
        m.data.chunks(m.cols.max(1)).map(<[T]>::to_vec).collect()
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                what: "matrix-vector product",
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matrix product",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        dot(&self.data, &self.data).sqrt()
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// `XᵀX` over the listed rows, optionally weighted per row.
    pub fn gram(&self, rows: &[usize], weights: Option<&[T]>) -> Self {
        let p = self.cols;
        let mut g = Self::zeros(p, p);
        for (idx, &i) in rows.iter().enumerate() {
            let w = weights.map_or(T::one(), |w| w[idx]);
            let x = self.row(i);
            for a in 0..p {
                let xa = x[a] * w;
                if xa == T::zero() {
                    continue;
                }
                let dst = &mut g.data[a * p + a..(a + 1) * p];
                for (d, &xb) in dst.iter_mut().zip(&x[a..]) {
                    *d = *d + xa * xb;
                }
            }
        }
        g.symmetrize_from_upper();
        g
    }

    /// `Xᵀy` over the listed rows, optionally weighted per row.
    pub fn cross(&self, rows: &[usize], y: &[T], weights: Option<&[T]>) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (idx, &i) in rows.iter().enumerate() {
            let w = weights.map_or(T::one(), |w| w[idx]);
            let s = w * y[i];
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o = *o + s * x;
            }
        }
        out
    }

    fn symmetrize_from_upper(&mut self) {
        let p = self.cols;
        for a in 0..p {
            for b in 0..a {
                self.data[a * p + b] = self.data[b * p + a];
            }
        }
    }

    /// Quadratic form `xᵀ A x`.
    pub fn quad_form(&self, x: &[T]) -> T {
        (0..self.rows).fold(T::zero(), |acc, i| acc + x[i] * dot(self.row(i), x))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdFactor<T> {
    lower: Matrix<T>,
    log_condition: T,
}

/// Factors a symmetric positive-definite matrix. Only the lower triangle of
/// `a` is read.
pub fn factor_spd<T: Scalar>(a: &Matrix<T>) -> Result<SpdFactor<T>> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            what: "spd factorization (square, p >= 1)",
            expected: a.nrows().max(1),
            found: a.ncols(),
        });
    }
    let p = a.nrows();
    let scale = (0..p).fold(T::zero(), |m, i| m.max(a[(i, i)].abs()));
    let pivot_floor = scale * T::epsilon() * T::from_count(p) * T::lit(16.0);
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let lj = &l.data[j * p..j * p + j];
        let d = a[(j, j)] - dot(lj, lj);
        if !(d > pivot_floor) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l.data[j * p + j] = djj;
        for i in j + 1..p {
            let s = a[(i, j)] - dot(&l.data[i * p..i * p + j], &l.data[j * p..j * p + j]);
            l.data[i * p + j] = s / djj;
        }
    }
    let (lo, hi) = (0..p).fold((T::infinity(), T::zero()), |(lo, hi), i| {
        let d = l[(i, i)] * l[(i, i)];
        (lo.min(d), hi.max(d))
    });
    Ok(SpdFactor {
        lower: l,
        log_condition: (hi / lo).ln(),
    })
}

impl<T: Scalar> SpdFactor<T> {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    /// `ln(max dᵢ² / min dᵢ²)` over the factor diagonal; a cheap stand-in for
    /// the log condition number.
    pub fn log_condition(&self) -> T {
        self.log_condition
    }

    fn check_len(&self, b: &[T]) -> Result<()> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side",
                expected: self.dim(),
                found: b.len(),
            });
        }
        Ok(())
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[T]) -> Result<Vec<T>> {
        self.check_len(b)?;
        let p = self.dim();
        let mut z = b.to_vec();
        for i in 0..p {
            let row = self.lower.row(i);
            let s = dot(&row[..i], &z[..i]);
            z[i] = (z[i] - s) / row[i];
        }
        Ok(z)
    }

    /// Solves `Lᵀ x = z`.
    pub fn backward(&self, z: &[T]) -> Result<Vec<T>> {
        self.check_len(z)?;
        let p = self.dim();
        let mut x = z.to_vec();
        for i in (0..p).rev() {
            let mut s = x[i];
            for k in i + 1..p {
                s = s - self.lower[(k, i)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let z = self.forward(b)?;
        self.backward(&z)
    }

    /// Materializes `A⁻¹`.
    pub fn inverse(&self) -> Matrix<T> {
        let p = self.dim();
        let mut inv = Matrix::zeros(p, p);
        let mut e = vec![T::zero(); p];
        for j in 0..p {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e).expect("dimension checked");
            for i in 0..p {
                inv[(i, j)] = col[i];
            }
        }
        // enforce exact symmetry
        for i in 0..p {
            for j in 0..i {
                let s = (inv[(i, j)] + inv[(j, i)]) / T::lit(2.0);
                inv[(i, j)] = s;
                inv[(j, i)] = s;
            }
        }
        inv
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> Matrix<T> {
        let p = self.dim();
        Matrix::from_fn(p, p, |i, j| {
            let m = i.min(j) + 1;
            dot(&self.lower.row(i)[..m], &self.lower.row(j)[..m])
        })
    }
}

/// Solves `A x = b` with a fresh factorization.
pub fn solve_spd<T: Scalar>(factor: &SpdFactor<T>, b: &[T]) -> Result<Vec<T>> {
    factor.solve(b)
}

/// Sherman–Morrison downdate: given `A⁻¹`, returns `(A - x xᵀ)⁻¹`.
///
/// Fails with [`Error::RankCollapse`] when `1 - xᵀA⁻¹x <= tolerance`, i.e. the
/// removed row carries rank the remaining rows do not.
pub fn downdate_inverse<T: Scalar>(inv: &Matrix<T>, x: &[T], tolerance: T) -> Result<Matrix<T>> {
    let mut out = inv.clone();
    downdate_inverse_in_place(&mut out, x, tolerance)?;
    Ok(out)
}

pub(crate) fn downdate_inverse_in_place<T: Scalar>(
    inv: &mut Matrix<T>,
    x: &[T],
    tolerance: T,
) -> Result<()> {
    let p = inv.nrows();
    if x.len() != p || !inv.is_square() {
        return Err(Error::DimensionMismatch {
            what: "downdate vector",
            expected: p,
            found: x.len(),
        });
    }
    let u = inv.mul_vec(x)?;
    let denom = T::one() - dot(x, &u);
    if !(denom > tolerance) {
        return Err(Error::RankCollapse {
            row: None,
            denominator: denom.as_f64(),
        });
    }
    for i in 0..p {
        let ui = u[i] / denom;
        let row = inv.row_mut(i);
        for (r, &uj) in row.iter_mut().zip(&u) {
            *r = *r + ui * uj;
        }
    }
    Ok(())
}
