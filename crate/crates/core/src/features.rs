use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{FafError, Result};

/// Dense row-per-node feature matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        check_finite(values.view())?;
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Array2::zeros((rows.len(), cols));
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(FafError::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            values.row_mut(r).assign(&ArrayView1::from(row.as_slice()));
        }
        Self::new(values)
    }

    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.values.row(v)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

pub(crate) fn check_finite(values: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), x) in values.indexed_iter() {
        if !x.is_finite() {
            return Err(FafError::NonFinite { row, col });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_non_finite() {
        let err = FeatureMatrix::new(array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, FafError::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
