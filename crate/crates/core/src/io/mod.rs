//! Delimited-text ingestion, fixed-effect expansion, response summaries and
//! JSON report output.

mod report;
mod summary;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, GroupColumn};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use report::{emit_report, to_json, Report};
pub use summary::{summarize, SummaryStats, OUTLIER_MULTIPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    Log,
    Log1p,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            // ln of 0 or a negative is -inf or NaN, caught by the finiteness check
            Transform::Log => x.ln(),
            Transform::Log1p => x.ln_1p(),
        }
    }
}

fn default_delimiter() -> char {
    ','
}

/// Column layout of an input table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub response_column: String,
    pub covariate_columns: Vec<String>,
    /// Categorical keys, kept as group labels until [`expand_fixed_effects`].
    #[serde(default)]
    pub fixed_effect_columns: Vec<String>,
    /// Per-column transform; unlisted columns are left alone.
    #[serde(default)]
    pub transform: BTreeMap<String, Transform>,
    /// Row ids to drop before fitting.
    #[serde(default)]
    pub drop_rows: Option<Vec<String>>,
    /// Column holding row ids. Without one, the id of a row is its zero-based
    /// position among the data lines of the file.
    #[serde(default)]
    pub id_column: Option<String>,
    /// Prepend an all-ones column named `intercept`.
    #[serde(default)]
    pub intercept: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

impl TableSchema {
    pub fn new(response: impl Into<String>, covariates: Vec<String>) -> Self {
        Self {
            response_column: response.into(),
            covariate_columns: covariates,
            fixed_effect_columns: Vec::new(),
            transform: BTreeMap::new(),
            drop_rows: None,
            id_column: None,
            intercept: false,
            delimiter: default_delimiter(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariate_columns.contains(&self.response_column) {
            return Err(Error::invalid("response column listed among covariates"));
        }
        if let Some(k) = self
            .fixed_effect_columns
            .iter()
            .find(|k| self.covariate_columns.contains(k) || **k == self.response_column)
        {
            return Err(Error::invalid(format!("fixed-effect key `{k}` is also a covariate or the response")));
        }
        let mut seen = HashSet::new();
        if let Some(c) = self.covariate_columns.iter().find(|c| !seen.insert(*c)) {
            return Err(Error::invalid(format!("covariate `{c}` listed twice")));
        }
        if self.covariate_columns.is_empty() && !self.intercept {
            return Err(Error::invalid("no covariates; list some or set intercept"));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::invalid("delimiter must be a single ASCII character"));
        }
        Ok(())
    }
}

fn parse_cell(raw: &str, row: usize, column: &str, transform: Transform) -> Result<f64> {
    let v = raw
        .trim()
        .parse::<f64>()
        .map(|x| transform.apply(x))
        .unwrap_or(f64::NAN);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteValue {
            row,
            column: column.to_string(),
        })
    }
}

/// Reads a delimited table with a header row into a dataset.
///
/// `NonFiniteValue::row` is the zero-based data line (header excluded).
/// Empty or unparseable cells count as non-finite.
pub fn load_dataset<T: Scalar>(path: impl AsRef<Path>, schema: &TableSchema) -> Result<Dataset<T>> {
    schema.validate()?;
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .from_reader(std::io::BufReader::new(file));
    let headers = reader.headers()?.clone();
    let index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_col = index(&schema.response_column)?;
    let x_cols = schema
        .covariate_columns
        .iter()
        .map(|c| index(c))
        .collect::<Result<Vec<_>>>()?;
    let fe_cols = schema
        .fixed_effect_columns
        .iter()
        .map(|c| index(c))
        .collect::<Result<Vec<_>>>()?;
    let id_col = schema.id_column.as_deref().map(index).transpose()?;
    let drop: HashSet<&str> = schema
        .drop_rows
        .iter()
        .flatten()
        .map(String::as_str)
        .collect();
    let transform = |c: &str| schema.transform.get(c).copied().unwrap_or_default();

    let p = x_cols.len() + schema.intercept as usize;
    let mut design = Vec::new();
    let mut response = Vec::new();
    let mut ids = Vec::new();
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); fe_cols.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let id = match id_col {
            Some(c) => record.get(c).unwrap_or("").trim().to_string(),
            None => line.to_string(),
        };
        if drop.contains(id.as_str()) {
            continue;
        }
        let cell = |c: usize| record.get(c).unwrap_or("");
        let y = parse_cell(cell(y_col), line, &schema.response_column, transform(&schema.response_column))?;
        if schema.intercept {
            design.push(T::one());
        }
        for (&c, name) in x_cols.iter().zip(&schema.covariate_columns) {
            let v = T::lit(parse_cell(cell(c), line, name, transform(name))?);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: line,
                    column: name.clone(),
                });
            }
            design.push(v);
        }
        for (out, &c) in labels.iter_mut().zip(&fe_cols) {
            out.push(cell(c).trim().to_string());
        }
        response.push(T::lit(y));
        ids.push(id);
    }
    if response.is_empty() {
        return Err(Error::EmptyAfterDrops);
    }
    let n = response.len();
    let mut names = Vec::with_capacity(p);
    if schema.intercept {
        names.push("intercept".to_string());
    }
    names.extend(schema.covariate_columns.iter().cloned());
    let mut data = Dataset::new(Matrix::from_vec(n, p, design)?, response)?
        .with_column_names(names)?
        .with_row_ids(ids)?;
    for (name, labels) in schema.fixed_effect_columns.iter().zip(labels) {
        data = data.with_group(GroupColumn {
            name: name.clone(),
            labels,
        })?;
    }
    Ok(data)
}

/// Appends one indicator column per level of each key, except the first
/// level in sorted order. Columns are named `key=level`.
pub fn expand_fixed_effects<T: Scalar>(data: &Dataset<T>, keys: &[String]) -> Result<Dataset<T>> {
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for key in keys {
        let group = data
            .group(key)
            .ok_or_else(|| Error::MissingColumn(key.clone()))?;
        let levels: BTreeSet<&str> = group.labels.iter().map(String::as_str).collect();
        if levels.len() < 2 {
            return Err(Error::invalid(format!("fixed-effect key `{key}` has fewer than 2 levels")));
        }
        for level in levels.into_iter().skip(1) {
            names.push(format!("{key}={level}"));
            columns.push(
                group
                    .labels
                    .iter()
                    .map(|l| if l == level { T::one() } else { T::zero() })
                    .collect(),
            );
        }
    }
    if columns.is_empty() {
        return Ok(data.clone());
    }
    let data = match data.column_names() {
        Some(_) => data.clone(),
        None => data
            .clone()
            .with_column_names((0..data.p()).map(|j| format!("x{j}")).collect())?,
    };
    data.append_columns(names, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::ols_coefficients;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema() -> TableSchema {
        TableSchema::new("y", vec!["a".into(), "b".into()])
    }

    #[test]
    fn three_rows_identity() {
        let f = write("y,a,b\n1,2,3\n4,5,6\n7,8,10\n");
        let d: Dataset<f64> = load_dataset(f.path(), &schema()).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.response(), &[1.0, 4.0, 7.0]);
        assert_eq!(d.row(2), &[8.0, 10.0]);
        assert_eq!(d.row_ids().unwrap(), &["0", "1", "2"]);
        assert_eq!(d.column_names().unwrap(), &["a", "b"]);
    }

    #[test]
    fn log_of_zero_names_the_row() {
        let f = write("y,a,b\n1,2,3\n4,0,6\n7,8,9\n");
        let mut s = schema();
        s.transform.insert("a".into(), Transform::Log);
        let err = load_dataset::<f64>(f.path(), &s).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue { row: 1, ref column } if column == "a"));
        s.transform.insert("a".into(), Transform::Log1p);
        let d: Dataset<f64> = load_dataset(f.path(), &s).unwrap();
        assert_eq!(d.row(1)[0], 0.0);
    }

    #[test]
    fn missing_column_and_bad_cells() {
        let f = write("y,a\n1,2\n");
        assert!(matches!(load_dataset::<f64>(f.path(), &schema()), Err(Error::MissingColumn(c)) if c == "b"));
        let f = write("y,a,b\n1,2,\n");
        assert!(matches!(load_dataset::<f64>(f.path(), &schema()), Err(Error::NonFiniteValue { row: 0, .. })));
        let f = write("y,a,b\nNaN,2,3\n");
        assert!(load_dataset::<f64>(f.path(), &schema()).is_err());
    }

    #[test]
    fn drops_by_id_column() {
        let f = write("id;y;a;b\nr1;1;2;3\nr2;4;5;6\nr3;7;8;9\nr4;0;1;1\n");
        let mut s = schema();
        s.delimiter = ';';
        s.id_column = Some("id".into());
        s.intercept = true;
        s.drop_rows = Some(vec!["r2".into()]);
        let d: Dataset<f64> = load_dataset(f.path(), &s).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.row_ids().unwrap(), &["r1", "r3", "r4"]);
        assert_eq!(d.row(1), &[1.0, 8.0, 9.0]);
        s.drop_rows = Some(["r1", "r2", "r3", "r4"].map(String::from).to_vec());
        assert!(matches!(load_dataset::<f64>(f.path(), &s), Err(Error::EmptyAfterDrops)));
    }

    #[test]
    fn schema_invariants() {
        let mut s = schema();
        s.covariate_columns.push("y".into());
        assert!(s.validate().is_err());
        let mut s = schema();
        s.fixed_effect_columns.push("a".into());
        assert!(s.validate().is_err());
        let json = r#"{"response_column":"y","covariate_columns":["a"],"transform":{"a":"log1p"}}"#;
        let s: TableSchema = serde_json::from_str(json).unwrap();
        assert_eq!(s.delimiter, ',');
        assert_eq!(s.transform["a"], Transform::Log1p);
    }

    fn panel() -> Dataset<f64> {
        // 3 units × 2 periods, balanced
        let unit = ["a", "a", "b", "b", "c", "c"];
        let year = ["1", "2", "1", "2", "1", "2"];
        let x = [0.5, 1.7, -0.3, 0.9, 2.2, 0.1];
        let y = [1.0, 3.1, 0.2, 1.5, 4.0, 1.9];
        let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![1.0, v]).collect();
        Dataset::from_rows(&rows, y.to_vec())
            .unwrap()
            .with_group(GroupColumn {
                name: "unit".into(),
                labels: unit.iter().map(|s| s.to_string()).collect(),
            })
            .unwrap()
            .with_group(GroupColumn {
                name: "year".into(),
                labels: year.iter().map(|s| s.to_string()).collect(),
            })
            .unwrap()
    }

    #[test]
    fn indicator_counts() {
        let d = panel();
        assert_eq!(expand_fixed_effects(&d, &[]).unwrap(), d);
        let e = expand_fixed_effects(&d, &["year".into()]).unwrap();
        assert_eq!(e.p(), 3);
        assert_eq!(e.column_names().unwrap()[2], "year=2");
        let e = expand_fixed_effects(&d, &["unit".into(), "year".into()]).unwrap();
        assert_eq!(e.p(), 2 + 2 + 1);
        assert_eq!(e.row(3), &[1.0, 0.9, 1.0, 0.0, 1.0]);
        assert!(expand_fixed_effects(&d, &["nope".into()]).is_err());
    }

    #[test]
    fn two_way_fixed_effects_match_demeaning() {
        let d = panel();
        let e = expand_fixed_effects(&d, &["unit".into(), "year".into()]).unwrap();
        let slope = ols_coefficients(&e, &e.all_rows()).unwrap()[1];
        // balanced panel: two-way within transform x - x̄_unit - x̄_year + x̄
        let within = |v: &[f64]| -> Vec<f64> {
            let mean = v.iter().sum::<f64>() / 6.0;
            (0..6)
                .map(|i| {
                    let u = i / 2;
                    let t = i % 2;
                    let mu = (v[2 * u] + v[2 * u + 1]) / 2.0;
                    let mt = (v[t] + v[2 + t] + v[4 + t]) / 3.0;
                    v[i] - mu - mt + mean
                })
                .collect()
        };
        let x: Vec<f64> = (0..6).map(|i| d.row(i)[1]).collect();
        let (xw, yw) = (within(&x), within(d.response()));
        let fw = xw.iter().zip(&yw).map(|(a, b)| a * b).sum::<f64>() / xw.iter().map(|a| a * a).sum::<f64>();
        assert!((slope - fw).abs() < 1e-8, "{slope} vs {fw}");
    }
}
