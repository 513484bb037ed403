use serde::{Deserialize, Serialize};

use super::SysIdError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub unit: String,
}

impl ColumnInfo {
    pub fn new(name: &str, unit: &str) -> Self {
        Self { name: name.to_string(), unit: unit.to_string() }
    }
}

/// Training inputs `X` (N x M) and labels `Y` (N x n), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    x_cols: Vec<ColumnInfo>,
    y_cols: Vec<ColumnInfo>,
}

impl Dataset {
    pub fn new(x_cols: Vec<ColumnInfo>, y_cols: Vec<ColumnInfo>) -> Self {
        Self { x: Vec::new(), y: Vec::new(), x_cols, y_cols }
    }

    pub fn push_row(&mut self, x: &[f64], y: &[f64]) -> Result<(), SysIdError> {
        if x.len() != self.x_cols.len() {
            return Err(SysIdError::LengthMismatch { expected: self.x_cols.len(), got: x.len() });
        }
        if y.len() != self.y_cols.len() {
            return Err(SysIdError::LengthMismatch { expected: self.y_cols.len(), got: y.len() });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(SysIdError::NonFiniteData { row: self.len() });
        }
        self.x.extend_from_slice(x);
        self.y.extend_from_slice(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.x_cols.len().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.x_cols.len()
    }

    pub fn output_dim(&self) -> usize {
        self.y_cols.len()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        let m = self.x_cols.len();
        &self.x[i * m..(i + 1) * m]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        let n = self.y_cols.len();
        &self.y[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        (0..self.len()).map(move |i| (self.x_row(i), self.y_row(i)))
    }

    pub fn x_columns(&self) -> &[ColumnInfo] {
        &self.x_cols
    }

    pub fn y_columns(&self) -> &[ColumnInfo] {
        &self.y_cols
    }

    /// Column `j` of `X`.
    pub fn x_column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.x_row(i)[j]).collect()
    }

    /// Column `j` of `Y`.
    pub fn y_column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.y_row(i)[j]).collect()
    }

    /// Concatenates rows of datasets sharing a column layout.
    pub fn extend(&mut self, other: &Dataset) -> Result<(), SysIdError> {
        if other.x_cols != self.x_cols || other.y_cols != self.y_cols {
            return Err(SysIdError::LengthMismatch { expected: self.input_dim(), got: other.input_dim() });
        }
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
        Ok(())
    }
}
