use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // a zero-column matrix has empty storage, so max(1) yields nothing
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Reorders columns so that output column `k` is input column `order[k]`.
    pub fn select_columns(&self, order: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * order.len());
        for row in self.rows() {
            data.extend(order.iter().map(|&c| row[c]));
        }
        Matrix {
            rows: self.rows,
            cols: order.len(),
            data,
        }
    }

    pub fn map_columns(&self, f: impl Fn(usize, f64) -> f64) -> Matrix {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % self.cols, v))
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map(|m| m.cols).unwrap_or(0);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.cols != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: m.cols,
                });
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Matrix { rows, cols, data })
    }
}

/// One time-period slice of tabular data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    period_id: usize,
    /// Human-readable period label (calendar unit or row range).
    period_key: String,
    features: Matrix,
    labels: Option<Vec<bool>>,
}

impl Batch {
    pub fn new(period_id: usize, features: Matrix, labels: Option<Vec<bool>>) -> Result<Self> {
        Self::with_key(period_id, format!("P{period_id}"), features, labels)
    }

    pub fn with_key(
        period_id: usize,
        period_key: impl Into<String>,
        features: Matrix,
        labels: Option<Vec<bool>>,
    ) -> Result<Self> {
        if features.n_rows() == 0 {
            return Err(Error::EmptyInput(format!("period {period_id} has no rows")));
        }
        if features.n_cols() == 0 {
            return Err(Error::Schema("batch has no feature columns".into()));
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InsufficientData(format!(
                "non-finite value at row {}, column {} of period {period_id}",
                pos / features.n_cols(),
                pos % features.n_cols()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != features.n_rows() {
                return Err(Error::LengthMismatch {
                    left: labels.len(),
                    right: features.n_rows(),
                });
            }
        }
        Ok(Self {
            period_id,
            period_key: period_key.into(),
            features,
            labels,
        })
    }

    pub fn period_id(&self) -> usize {
        self.period_id
    }

    pub fn period_key(&self) -> &str {
        &self.period_key
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    /// Labels, or a `MissingLabels` error naming the period.
    pub fn require_labels(&self) -> Result<&[bool]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::MissingLabels(format!("period {} is unlabeled", self.period_id)))
    }

    pub fn len(&self) -> usize {
        self.features.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.features.column(col)
    }

    /// True when labels exist and contain both classes.
    pub fn has_both_classes(&self) -> bool {
        match &self.labels {
            Some(l) => l.iter().any(|&y| y) && l.iter().any(|&y| !y),
            None => false,
        }
    }

    pub(crate) fn with_features(&self, features: Matrix) -> Batch {
        Batch {
            period_id: self.period_id,
            period_key: self.period_key.clone(),
            features,
            labels: self.labels.clone(),
        }
    }

    /// Row-wise concatenation; the result carries the last batch's period.
    pub fn concat(parts: &[&Batch]) -> Result<Batch> {
        let last = parts
            .last()
            .ok_or_else(|| Error::EmptyInput("no batches to concatenate".into()))?;
        let mats: Vec<&Matrix> = parts.iter().map(|b| &b.features).collect();
        let features = Matrix::vstack(&mats)?;
        let labels = if parts.iter().all(|b| b.labels.is_some()) {
            Some(
                parts
                    .iter()
                    .flat_map(|b| b.labels.as_ref().unwrap().iter().copied())
                    .collect(),
            )
        } else {
            None
        };
        Ok(Batch {
            period_id: last.period_id,
            period_key: last.period_key.clone(),
            features,
            labels,
        })
    }
}
