//! ZCA whitening.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::siggen::Dataset;

/// Default eigenvalue regularizer, relative to the mean covariance eigenvalue.
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// A fitted ZCA transform `x = Z (s - mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningFilter {
    pub mean: Array1<f64>,
    /// Symmetric whitening matrix.
    pub z: Array2<f64>,
    /// Regularizer relative to the mean eigenvalue, as passed to the fit.
    pub epsilon: f64,
}

impl WhiteningFilter {
    /// Identity filter of dimension `dim` (zero mean, `Z = I`).
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            z: Array2::eye(dim),
            epsilon: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Whitens one vector.
    pub fn apply(&self, s: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(s.len())?;
        Ok(self.z.dot(&(&s - &self.mean)))
    }

    /// Whitens every row of `samples`.
    pub fn apply_rows(&self, samples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_dim(samples.ncols())?;
        let centred = &samples - &self.mean.view().insert_axis(Axis(0));
        Ok(centred.dot(&self.z.t()))
    }

    /// Whitens every vector of `dataset`, one row per vector.
    pub fn apply_dataset(&self, dataset: &Dataset) -> Result<Array2<f64>> {
        self.apply_rows(dataset_matrix(dataset).view())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "whitening input",
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Copies dataset samples into an `n x dim` matrix of `f64`.
pub fn dataset_matrix(dataset: &Dataset) -> Array2<f64> {
    let mut m = Array2::zeros((dataset.len(), dataset.vector_len));
    for (mut row, v) in m.rows_mut().into_iter().zip(&dataset.vectors) {
        row.iter_mut()
            .zip(&v.samples)
            .for_each(|(dst, &src)| *dst = f64::from(src));
    }
    m
}

/// Sample mean and (biased, 1/n) covariance of the rows of `data`.
pub fn mean_and_covariance(data: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = data.nrows() as f64;
    let mean = data.mean_axis(Axis(0)).expect("non-empty data");
    let centred = &data - &mean.view().insert_axis(Axis(0));
    let cov = centred.t().dot(&centred) / n;
    (mean, cov)
}

/// Fits a ZCA filter to the rows of `data`.
///
/// `Z = E (D + eps * mean(D) I)^(-1/2) E^T` where `E`, `D` are the
/// eigenvectors and eigenvalues of the sample covariance of the centred rows.
pub fn fit_zca_matrix(data: ArrayView2<'_, f64>, epsilon: f64) -> Result<WhiteningFilter> {
    if data.nrows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Config("whitening epsilon must be positive".into()));
    }
    let dim = data.ncols();
    if data.nrows() < dim {
        log::warn!(
            "whitening fit is rank deficient ({} vectors for dimension {dim}); relying on epsilon",
            data.nrows()
        );
    }
    let (mean, cov) = mean_and_covariance(data);
    let cov_na = DMatrix::from_row_iterator(dim, dim, cov.iter().copied());
    let eig = SymmetricEigen::new(cov_na);
    let mean_eig = eig.eigenvalues.iter().sum::<f64>() / dim as f64;
    let reg = epsilon * mean_eig.max(f64::MIN_POSITIVE);
    let scales: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&d| 1.0 / (d.max(0.0) + reg).sqrt())
        .collect();

    let e = &eig.eigenvectors;
    let mut z = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = (0..dim).map(|k| e[(i, k)] * scales[k] * e[(j, k)]).sum();
            z[[i, j]] = v;
            z[[j, i]] = v;
        }
    }
    Ok(WhiteningFilter { mean, z, epsilon })
}

/// Fits a ZCA filter to a dataset.
pub fn fit_zca(train: &Dataset, epsilon: f64) -> Result<WhiteningFilter> {
    fit_zca_matrix(dataset_matrix(train).view(), epsilon)
}
