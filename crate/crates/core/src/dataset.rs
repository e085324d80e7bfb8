use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Categorical per-row labels, e.g. a country or year key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupColumn {
    pub name: String,
    pub labels: Vec<String>,
}

/// Design matrix `X` (n×p) and response `y`.
///
/// No intercept is ever inserted; include an all-ones column when one is
/// wanted.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    design: Matrix<T>,
    response: Vec<T>,
    column_names: Option<Vec<String>>,
    row_ids: Option<Vec<String>>,
    groups: Vec<GroupColumn>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(design: Matrix<T>, response: Vec<T>) -> Result<Self> {
        let (n, p) = (design.nrows(), design.ncols());
        if response.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: n,
                found: response.len(),
            });
        }
        if p == 0 || n < p {
            return Err(Error::invalid(format!(
                "dataset needs n >= p >= 1 (n = {n}, p = {p})"
            )));
        }
        for i in 0..n {
            if !response[i].is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i,
                    column: "response".into(),
                });
            }
            if let Some(j) = design.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: i,
                    column: format!("x{j}"),
                });
            }
        }
        Ok(Self {
            design,
            response,
            column_names: None,
            row_ids: None,
            groups: Vec::new(),
        })
    }

    /// Convenience constructor from per-row covariate vectors.
    pub fn from_rows(rows: &[Vec<T>], response: Vec<T>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, response)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "column names",
                expected: self.p(),
                found: names.len(),
            });
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn with_row_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "row ids",
                expected: self.n(),
                found: ids.len(),
            });
        }
        self.row_ids = Some(ids);
        Ok(self)
    }

    pub fn with_group(mut self, group: GroupColumn) -> Result<Self> {
        if group.labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "group labels",
                expected: self.n(),
                found: group.labels.len(),
            });
        }
        self.groups.push(group);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.design
    }

    pub fn response(&self) -> &[T] {
        &self.response
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.design.row(i)
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn row_ids(&self) -> Option<&[String]> {
        self.row_ids.as_deref()
    }

    pub fn groups(&self) -> &[GroupColumn] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&GroupColumn> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Index of a named column, if names are attached.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names
            .as_ref()
            .and_then(|names| names.iter().position(|c| c == name))
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.n()).collect()
    }

    /// Dataset holding only `rows`, in the given order.
    pub fn restrict(&self, rows: &[usize]) -> Result<Self> {
        self.check_rows(rows)?;
        let p = self.p();
        let mut data = Vec::with_capacity(rows.len() * p);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        let design = Matrix::from_vec(rows.len(), p, data)?;
        let response = rows.iter().map(|&i| self.response[i]).collect();
        let mut out = Self::new(design, response)?;
        out.column_names = self.column_names.clone();
        out.row_ids = self
            .row_ids
            .as_ref()
            .map(|ids| rows.iter().map(|&i| ids[i].clone()).collect());
        out.groups = self
            .groups
            .iter()
            .map(|g| GroupColumn {
                name: g.name.clone(),
                labels: rows.iter().map(|&i| g.labels[i].clone()).collect(),
            })
            .collect();
        Ok(out)
    }

    /// Appends covariate columns; used by fixed-effect expansion.
    pub(crate) fn append_columns(&self, names: Vec<String>, columns: Vec<Vec<T>>) -> Result<Self> {
        let (n, p, extra) = (self.n(), self.p(), columns.len());
        let mut data = Vec::with_capacity(n * (p + extra));
        for i in 0..n {
            data.extend_from_slice(self.row(i));
            data.extend(columns.iter().map(|c| c[i]));
        }
        let mut out = Self::new(Matrix::from_vec(n, p + extra, data)?, self.response.clone())?;
        out.column_names = self.column_names.as_ref().map(|old| {
            let mut all = old.clone();
            all.extend(names.iter().cloned());
            all
        });
        out.row_ids = self.row_ids.clone();
        out.groups = self.groups.clone();
        Ok(out)
    }

    /// Validates a row subset: in range, no duplicates.
    pub fn check_rows(&self, rows: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.n()];
        for &i in rows {
            if i >= self.n() {
                return Err(Error::invalid(format!(
                    "row index {i} out of range (n = {})",
                    self.n()
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("row index {i} listed twice")));
            }
        }
        Ok(())
    }
}
