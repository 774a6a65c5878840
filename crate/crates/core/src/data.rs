//! Training/test data and the optional per-feature standardization.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// Inputs `A` (one sample per row) and responses `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Array2<f64>,
    targets: Array1<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(invalid("dataset must contain at least one sample"));
        }
        if inputs.ncols() == 0 {
            return Err(invalid("dataset must contain at least one feature"));
        }
        check_dim(inputs.nrows(), targets.len())?;
        if let Some(((row, col), _)) = inputs.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite input at row {row}, column {col}"
            )));
        }
        if let Some((row, _)) = targets.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("non-finite target at row {row}")));
        }
        Ok(Self {
            inputs,
            targets,
            feature_names: None,
        })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * n);
        for row in rows {
            check_dim(n, row.len())?;
            flat.extend_from_slice(row);
        }
        let inputs =
            Array2::from_shape_vec((rows.len(), n), flat).map_err(|e| invalid(e.to_string()))?;
        Self::new(inputs, Array1::from(targets.to_vec()))
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        check_dim(self.n_features(), names.len())?;
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Number of samples `l`.
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of features `n`.
    pub fn n_features(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(i)
    }

    /// Returns a copy with the inputs replaced, keeping targets and names.
    pub(crate) fn with_inputs(&self, inputs: Array2<f64>) -> Self {
        Self {
            inputs,
            targets: self.targets.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Per-feature affine map `x -> (x - mean) / scale`, fit on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits zero mean / unit (population) variance per column. Constant columns get scale 1.
    pub fn fit(inputs: &Array2<f64>) -> Self {
        let l = inputs.nrows() as f64;
        let mean: Vec<f64> = inputs.axis_iter(Axis(1)).map(|col| col.sum() / l).collect();
        let scale = inputs
            .axis_iter(Axis(1))
            .zip(&mean)
            .map(|(col, &m)| {
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / l;
                let sd = var.sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_point(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        check_dim(self.dim(), inputs.ncols())?;
        let mut out = inputs.clone();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    /// Maps a standardized point back to original units.
    pub fn inverse_point(&self, z: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.dim(), z.len())?;
        Ok(z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(Dataset::new(Array2::zeros((0, 1)), Array1::zeros(0)).is_err());
        assert!(Dataset::new(Array2::zeros((2, 1)), Array1::zeros(3)).is_err());
        assert!(Dataset::new(array![[f64::NAN]], array![1.0]).is_err());
        assert!(Dataset::new(array![[1.0]], array![f64::INFINITY]).is_err());
        assert!(Dataset::from_rows(&[vec![1.0, 2.0], vec![1.0]], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let x = array![[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.scale[1], 1.0);
        let z = s.transform(&x).unwrap();
        assert!((z.column(0).sum()).abs() < 1e-12);
        let var = z.column(0).mapv(|v| v * v).sum() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        let back = s.inverse_point(z.row(2)).unwrap();
        assert!((back[0] - 5.0).abs() < 1e-12);
    }
}
