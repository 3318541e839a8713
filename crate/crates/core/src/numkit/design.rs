use nalgebra::DMatrix;

use super::NumError;

pub const INTERCEPT: &str = "(Intercept)";

/// Dense design matrix, one row per individual and one column per model term.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    /// Builds a design from named columns without adding an intercept.
    pub fn from_columns(labels: Vec<String>, columns: &[&[f64]]) -> Result<Self, NumError> {
        if labels.len() != columns.len() {
            return Err(NumError::DimensionMismatch {
                what: "column labels",
                expected: columns.len(),
                found: labels.len(),
            });
        }
        let rows = columns.first().map_or(0, |c| c.len());
        for (label, col) in labels.iter().zip(columns) {
            if col.len() != rows {
                return Err(NumError::DimensionMismatch {
                    what: "column length",
                    expected: rows,
                    found: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(NumError::NonFinite {
                    column: label.clone(),
                    row,
                });
            }
        }
        let values = DMatrix::from_iterator(rows, columns.len(), columns.iter().flat_map(|c| c.iter().copied()));
        Ok(Self { values, labels })
    }

    /// Builds a design with a leading all-ones intercept column.
    pub fn with_intercept(labels: Vec<String>, columns: &[&[f64]]) -> Result<Self, NumError> {
        let rows = columns.first().map_or(0, |c| c.len());
        Self::with_intercept_rows(rows, labels, columns)
    }

    /// Intercept design with an explicit row count, so an intercept-only
    /// model (no further columns) still knows its size.
    pub fn with_intercept_rows(rows: usize, labels: Vec<String>, columns: &[&[f64]]) -> Result<Self, NumError> {
        let ones = vec![1.0; rows];
        let mut all_labels = Vec::with_capacity(labels.len() + 1);
        all_labels.push(INTERCEPT.to_string());
        all_labels.extend(labels);
        let mut cols: Vec<&[f64]> = Vec::with_capacity(columns.len() + 1);
        cols.push(&ones);
        cols.extend_from_slice(columns);
        Self::from_columns(all_labels, &cols)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn columns(&self) -> usize {
        self.values.ncols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn has_intercept(&self) -> bool {
        self.labels.first().is_some_and(|l| l == INTERCEPT)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.rows();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// New design holding the given rows (repeats allowed, e.g. bootstrap).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let values = self.values.select_rows(rows.iter());
        Self {
            values,
            labels: self.labels.clone(),
        }
    }

    /// Copy of the design with one column's values replaced.
    pub fn with_column_values(&self, j: usize, v: f64) -> Self {
        let mut out = self.clone();
        out.values.column_mut(j).fill(v);
        out
    }

}
