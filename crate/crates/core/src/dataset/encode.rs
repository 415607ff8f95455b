use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::table::{ColumnData, RawTable};
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Ok(Matrix {
            data: rows.concat(),
            n_rows: rows.len(),
            n_cols,
        })
    }

    pub fn from_vec(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Argument(format!(
                "{} values do not fill a {n_rows}x{n_cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix {
            data,
            n_rows,
            n_cols,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            data: vec![0.0; n_rows * n_cols],
            n_rows,
            n_cols,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            data,
            n_rows: rows.len(),
            n_cols: self.n_cols,
        }
    }

    pub fn drop_columns(&self, drop: &[usize]) -> Matrix {
        let keep: Vec<usize> = (0..self.n_cols).filter(|j| !drop.contains(j)).collect();
        let mut data = Vec::with_capacity(self.n_rows * keep.len());
        for row in self.rows() {
            data.extend(keep.iter().map(|&j| row[j]));
        }
        Matrix {
            data,
            n_rows: self.n_rows,
            n_cols: keep.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    /// Two-valued categorical column: 1 encodes `one`, 0 encodes `zero`.
    Binary { zero: String, one: String },
    /// Member of a one-hot block; 1 iff the origin column equals `value`.
    OneHot { value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    /// Raw column the feature was derived from.
    pub origin: String,
    pub kind: FeatureKind,
}

impl FeatureInfo {
    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, FeatureKind::Continuous)
    }
}

/// Column and value naming a binary target inside a raw table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRef {
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeSpec {
    /// `y = 1` iff the label column equals `value`.
    pub label: ValueRef,
    /// `s = 0` iff the sensitive column equals `value`.
    pub sensitive: ValueRef,
    /// Columns left out of the feature matrix besides the label.
    #[serde(default)]
    pub exclude: Vec<String>,
}

/// Numeric design matrix with binary label `y` and binary group `s`.
///
/// `s = 0` marks the protected (minority) group. `row_ids` tracks the row
/// of the encoded table each row came from, through every subsetting step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    pub features: Vec<FeatureInfo>,
    pub sensitive_feature_indices: Vec<usize>,
    /// Raw values of the sensitive column for `s = 0` and `s = 1`.
    pub group_labels: [String; 2],
    pub row_ids: Vec<usize>,
}

impl EncodedDataset {
    pub fn new(
        x: Matrix,
        y: Vec<u8>,
        s: Vec<u8>,
        features: Vec<FeatureInfo>,
        sensitive_feature_indices: Vec<usize>,
    ) -> Result<Self> {
        let n = x.n_rows();
        if y.len() != n || s.len() != n {
            return Err(Error::Argument(format!(
                "row counts differ: x {n}, y {}, s {}",
                y.len(),
                s.len()
            )));
        }
        if features.len() != x.n_cols() {
            return Err(Error::Argument("feature metadata does not match x".into()));
        }
        if y.iter().chain(&s).any(|&v| v > 1) {
            return Err(Error::Argument("y and s must be 0/1".into()));
        }
        if sensitive_feature_indices.iter().any(|&i| i >= x.n_cols()) {
            return Err(Error::Argument("sensitive feature index out of range".into()));
        }
        Ok(EncodedDataset {
            x,
            y,
            s,
            features,
            sensitive_feature_indices,
            group_labels: ["0".into(), "1".into()],
            row_ids: (0..n).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.n_cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn subset(&self, rows: &[usize]) -> EncodedDataset {
        EncodedDataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            s: rows.iter().map(|&r| self.s[r]).collect(),
            features: self.features.clone(),
            sensitive_feature_indices: self.sensitive_feature_indices.clone(),
            group_labels: self.group_labels.clone(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
        }
    }

    /// Indices of the rows with `s == group`.
    pub fn group_rows(&self, group: u8) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.s[i] == group).collect()
    }

    pub fn positive_rate(&self, group: u8) -> Option<f64> {
        let (pos, n) = self
            .y
            .iter()
            .zip(&self.s)
            .filter(|(_, &s)| s == group)
            .fold((0usize, 0usize), |(p, n), (&y, _)| (p + y as usize, n + 1));
        (n > 0).then(|| pos as f64 / n as f64)
    }

    /// Category of `origin` in row `row`, read back from its encoding.
    pub fn decode_category(&self, origin: &str, row: usize) -> Option<String> {
        let x = self.row(row);
        let mut hot = None;
        for (j, f) in self.features.iter().enumerate() {
            if f.origin != origin {
                continue;
            }
            match &f.kind {
                FeatureKind::Binary { zero, one } => {
                    return Some(if x[j] == 1.0 { one.clone() } else { zero.clone() })
                }
                FeatureKind::OneHot { value } if x[j] == 1.0 => hot = Some(value.clone()),
                _ => {}
            }
        }
        hot
    }
}

fn categories(values: &[Option<String>], column: &str) -> Result<Vec<String>> {
    let mut set = BTreeSet::new();
    for (row, v) in values.iter().enumerate() {
        match v {
            Some(v) => {
                set.insert(v.clone());
            }
            None => {
                return Err(Error::Argument(format!(
                    "column '{column}' has a missing value at row {row}; drop missing rows first"
                )))
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// Encodes a preprocessed table into features, label and group vectors.
///
/// Two-valued categoricals become a single 0/1 feature, wider ones a full
/// one-hot block, continuous columns pass through. The sensitive column is
/// kept among the features with value `s`. If the protected group turns out
/// to have the higher positive rate the groups are swapped with a warning,
/// so that `s = 0` is always the disadvantaged group.
pub fn encode(table: &RawTable, spec: &EncodeSpec) -> Result<EncodedDataset> {
    let label_col = table
        .column(&spec.label.column)
        .ok_or_else(|| Error::Config(format!("label column '{}' not found", spec.label.column)))?;
    let sens_col = table.column(&spec.sensitive.column).ok_or_else(|| {
        Error::Config(format!(
            "sensitive column '{}' not found",
            spec.sensitive.column
        ))
    })?;
    if spec.label.column == spec.sensitive.column {
        return Err(Error::Config("label and sensitive columns must differ".into()));
    }
    for ex in &spec.exclude {
        if table.column(ex).is_none() {
            return Err(Error::Config(format!("excluded column '{ex}' not found")));
        }
    }

    let ColumnData::Categorical(labels) = &label_col.data else {
        return Err(Error::Argument(format!(
            "label column '{}' must be categorical",
            label_col.name
        )));
    };
    let label_values = categories(labels, &label_col.name)?;
    if label_values.len() > 2 {
        return Err(Error::Argument(format!(
            "label column '{}' has {} distinct values after normalization: {:?}",
            label_col.name,
            label_values.len(),
            label_values
        )));
    }
    if !label_values.contains(&spec.label.value) && !labels.is_empty() {
        return Err(Error::Argument(format!(
            "positive label '{}' not present in '{}'",
            spec.label.value, label_col.name
        )));
    }
    let y: Vec<u8> = labels
        .iter()
        .map(|v| u8::from(v.as_deref() == Some(spec.label.value.as_str())))
        .collect();

    let ColumnData::Categorical(groups) = &sens_col.data else {
        return Err(Error::Argument(format!(
            "sensitive column '{}' must be categorical",
            sens_col.name
        )));
    };
    let group_values = categories(groups, &sens_col.name)?;
    if !group_values.contains(&spec.sensitive.value) {
        return Err(Error::Argument(format!(
            "protected value '{}' not present in '{}'",
            spec.sensitive.value, sens_col.name
        )));
    }
    if group_values.len() != 2 {
        return Err(Error::Argument(format!(
            "sensitive column '{}' must have exactly two values, found {:?}",
            sens_col.name, group_values
        )));
    }
    let other = group_values
        .iter()
        .find(|v| **v != spec.sensitive.value)
        .cloned()
        .unwrap_or_default();
    let mut group_labels = [spec.sensitive.value.clone(), other];
    let mut s: Vec<u8> = groups
        .iter()
        .map(|v| u8::from(v.as_deref() != Some(spec.sensitive.value.as_str())))
        .collect();

    let rate = |g: u8| {
        let (p, n) = y
            .iter()
            .zip(&s)
            .filter(|(_, &sv)| sv == g)
            .fold((0usize, 0usize), |(p, n), (&yv, _)| (p + yv as usize, n + 1));
        p as f64 / n.max(1) as f64
    };
    let (r0, r1) = (rate(0), rate(1));
    if r0 > r1 {
        log::warn!(
            "protected group '{}' has the higher positive rate ({r0:.4} > {r1:.4}); swapping groups so s=0 is '{}'",
            group_labels[0],
            group_labels[1]
        );
        for v in &mut s {
            *v = 1 - *v;
        }
        group_labels.swap(0, 1);
    }

    let n = table.n_rows();
    let mut features = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut sensitive_feature_indices = Vec::new();
    for col in table.columns() {
        if col.name == spec.label.column || spec.exclude.contains(&col.name) {
            continue;
        }
        match &col.data {
            ColumnData::Continuous(v) => {
                let vals = v
                    .iter()
                    .enumerate()
                    .map(|(row, x)| {
                        x.ok_or_else(|| {
                            Error::Argument(format!(
                                "column '{}' has a missing value at row {row}; drop missing rows first",
                                col.name
                            ))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                features.push(FeatureInfo {
                    name: col.name.clone(),
                    origin: col.name.clone(),
                    kind: FeatureKind::Continuous,
                });
                columns.push(vals);
            }
            ColumnData::Categorical(_) if col.name == spec.sensitive.column => {
                sensitive_feature_indices.push(features.len());
                features.push(FeatureInfo {
                    name: format!("{}={}", col.name, group_labels[1]),
                    origin: col.name.clone(),
                    kind: FeatureKind::Binary {
                        zero: group_labels[0].clone(),
                        one: group_labels[1].clone(),
                    },
                });
                columns.push(s.iter().map(|&v| v as f64).collect());
            }
            ColumnData::Categorical(v) => {
                let cats = categories(v, &col.name)?;
                if cats.len() == 2 {
                    features.push(FeatureInfo {
                        name: format!("{}={}", col.name, cats[1]),
                        origin: col.name.clone(),
                        kind: FeatureKind::Binary {
                            zero: cats[0].clone(),
                            one: cats[1].clone(),
                        },
                    });
                    columns.push(
                        v.iter()
                            .map(|c| f64::from(u8::from(c.as_deref() == Some(cats[1].as_str()))))
                            .collect(),
                    );
                } else {
                    for cat in &cats {
                        features.push(FeatureInfo {
                            name: format!("{}={}", col.name, cat),
                            origin: col.name.clone(),
                            kind: FeatureKind::OneHot { value: cat.clone() },
                        });
                        columns.push(
                            v.iter()
                                .map(|c| f64::from(u8::from(c.as_deref() == Some(cat.as_str()))))
                                .collect(),
                        );
                    }
                }
            }
        }
    }

    let d = columns.len();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(columns.iter().map(|c| c[i]));
    }
    let mut ds = EncodedDataset::new(
        Matrix::from_vec(data, n, d)?,
        y,
        s,
        features,
        sensitive_feature_indices,
    )?;
    ds.group_labels = group_labels;
    Ok(ds)
}
