//! Kernel functions and the augmented Gram matrix `K(A, Aᵀ) + eeᵀ`.

use ndarray::{Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, invalid, Result, TsvqrError};

/// Row cap above which the dense Gram matrix is refused (20k rows is ~3.2 GB).
pub const DEFAULT_GRAM_ROW_LIMIT: usize = 20_000;

const MORLET_FREQUENCY: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `exp(-‖x − z‖² / (2p²))`
    Gaussian {
        p: f64,
    },
    /// Morlet product `∏ cos(1.75·δ/a)·exp(−δ²/(2a²))`
    Wavelet {
        a: f64,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { p } if p > 0.0 && p.is_finite() => Ok(()),
            KernelSpec::Wavelet { a } if a > 0.0 && a.is_finite() => Ok(()),
            other => Err(invalid(format!(
                "kernel parameter must be positive: {other:?}"
            ))),
        }
    }

    /// Same family with a new width parameter (ignored for `Linear`).
    pub fn with_param(&self, value: f64) -> Self {
        match self {
            KernelSpec::Linear => KernelSpec::Linear,
            KernelSpec::Gaussian { .. } => KernelSpec::Gaussian { p: value },
            KernelSpec::Wavelet { .. } => KernelSpec::Wavelet { a: value },
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            KernelSpec::Linear => None,
            KernelSpec::Gaussian { p } => Some(p),
            KernelSpec::Wavelet { a } => Some(a),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Wavelet { .. } => "wavelet",
        }
    }

    /// Evaluates the kernel without a length check.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(&z),
            KernelSpec::Gaussian { p } => {
                let sq: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * p * p)).exp()
            }
            KernelSpec::Wavelet { a } => x
                .iter()
                .zip(z.iter())
                .map(|(u, v)| {
                    let d = u - v;
                    (MORLET_FREQUENCY * d / a).cos() * (-d * d / (2.0 * a * a)).exp()
                })
                .product(),
        }
    }
}

/// Kernel value `K(x, z)`.
pub fn kernel_eval(
    spec: &KernelSpec,
    x: ArrayView1<'_, f64>,
    z: ArrayView1<'_, f64>,
) -> Result<f64> {
    check_dim(x.len(), z.len())?;
    Ok(spec.eval_unchecked(x, z))
}

/// Dense symmetric matrix `H̄ = K(A, Aᵀ) + eeᵀ` with its diagonal cached.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGram {
    matrix: Array2<f64>,
    diag: Vec<f64>,
}

impl AugmentedGram {
    /// Wraps an existing square matrix (used by tests and by callers with a precomputed Gram).
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        check_dim(matrix.nrows(), matrix.ncols())?;
        let diag = matrix.diag().to_vec();
        Ok(Self { matrix, diag })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `H̄·e`, the row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.sum_axis(Axis(1)).to_vec()
    }
}

pub fn build_augmented_gram(data: &Dataset, spec: &KernelSpec) -> Result<AugmentedGram> {
    build_augmented_gram_with_limit(data, spec, DEFAULT_GRAM_ROW_LIMIT)
}

/// Builds the Gram matrix, refusing inputs with more than `row_limit` samples.
///
/// Rows are filled in parallel; each entry is computed once for the upper
/// triangle and mirrored, so the result is exactly symmetric and independent
/// of the thread count.
pub fn build_augmented_gram_with_limit(
    data: &Dataset,
    spec: &KernelSpec,
    row_limit: usize,
) -> Result<AugmentedGram> {
    spec.validate()?;
    let l = data.len();
    if l > row_limit {
        return Err(TsvqrError::GramTooLarge {
            rows: l,
            limit: row_limit,
        });
    }
    let a = data.inputs();
    let mut matrix = Array2::<f64>::zeros((l, l));
    matrix
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let xi = a.row(i);
            for j in i..l {
                row[j] = spec.eval_unchecked(xi, a.row(j)) + 1.0;
            }
        });
    for i in 0..l {
        for j in 0..i {
            matrix[[i, j]] = matrix[[j, i]];
        }
    }
    AugmentedGram::from_matrix(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(rows: &[Vec<f64>]) -> Dataset {
        Dataset::from_rows(rows, &vec![0.0; rows.len()]).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let g = KernelSpec::Gaussian { p: 1.0 };
        let x = array![0.3, -2.0];
        assert_eq!(kernel_eval(&g, x.view(), x.view()).unwrap(), 1.0);
        let v = kernel_eval(
            &KernelSpec::Linear,
            array![1.0, 2.0].view(),
            array![3.0, 4.0].view(),
        );
        assert_eq!(v.unwrap(), 11.0);
        let v = kernel_eval(&g, array![0.0].view(), array![2.0].view()).unwrap();
        assert!((v - 0.135_335_283_236_612_7).abs() < 1e-12);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let r = kernel_eval(
            &KernelSpec::Linear,
            array![1.0].view(),
            array![1.0, 2.0].view(),
        );
        assert!(matches!(r, Err(TsvqrError::DimensionMismatch { .. })));
    }

    #[test]
    fn wavelet_is_one_on_diagonal_and_symmetric() {
        let w = KernelSpec::Wavelet { a: 0.7 };
        let x = array![0.4, -1.1, 2.0];
        let z = array![0.1, 0.5, 1.5];
        assert_eq!(kernel_eval(&w, x.view(), x.view()).unwrap(), 1.0);
        let a = kernel_eval(&w, x.view(), z.view()).unwrap();
        let b = kernel_eval(&w, z.view(), x.view()).unwrap();
        assert_eq!(a, b);
        // one-dimensional hand evaluation
        let d: f64 = 0.3;
        let expected = (1.75 * d / 0.7).cos() * (-d * d / (2.0 * 0.49)).exp();
        let got = kernel_eval(&w, array![0.3].view(), array![0.0].view()).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn invalid_kernel_params() {
        assert!(KernelSpec::Gaussian { p: 0.0 }.validate().is_err());
        assert!(KernelSpec::Wavelet { a: -1.0 }.validate().is_err());
        assert!(KernelSpec::Gaussian { p: f64::NAN }.validate().is_err());
    }

    #[test]
    fn gram_examples() {
        let g = build_augmented_gram(&ds(&[vec![1.0], vec![2.0]]), &KernelSpec::Linear).unwrap();
        assert_eq!(g.matrix(), &array![[2.0, 3.0], [3.0, 5.0]]);
        assert_eq!(g.diag(), &[2.0, 5.0]);

        let gauss = KernelSpec::Gaussian { p: 1.0 };
        let g = build_augmented_gram(&ds(&[vec![0.0], vec![0.0]]), &gauss).unwrap();
        assert_eq!(g.matrix(), &array![[2.0, 2.0], [2.0, 2.0]]);

        let g = build_augmented_gram(&ds(&[vec![0.0], vec![2.0]]), &gauss).unwrap();
        assert_eq!(g.diag(), &[2.0, 2.0]);
        assert!((g.matrix()[[0, 1]] - 1.135_335_283_236_612_7).abs() < 1e-12);
        assert_eq!(g.row_sums().len(), 2);
    }

    #[test]
    fn gram_row_limit() {
        let d = ds(&[vec![0.0], vec![1.0], vec![2.0]]);
        let r = build_augmented_gram_with_limit(&d, &KernelSpec::Linear, 2);
        assert!(matches!(
            r,
            Err(TsvqrError::GramTooLarge { rows: 3, limit: 2 })
        ));
    }

    #[test]
    fn gram_thread_count_independent() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin(), i as f64 / 7.0])
            .collect();
        let d = ds(&rows);
        let spec = KernelSpec::Wavelet { a: 1.3 };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| build_augmented_gram(&d, &spec).unwrap());
        let b = four.install(|| build_augmented_gram(&d, &spec).unwrap());
        assert_eq!(a, b);
    }
}
