use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{matern_correlation, matern_sdf, square_matrix, CovarianceModel, MaternParams};
use super::{SpectralMatrix, SpectralModel};
use crate::error::ModelError;

/// Separable model `C(h) = R c(h)` with a unit-variance Matérn correlation `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableModel {
    pub dim: usize,
    /// Positive-definite cross-covariance matrix at lag zero, row-major.
    pub r: Vec<Vec<f64>>,
    pub nu: f64,
    pub a: f64,
}

impl SeparableModel {
    pub fn new(dim: usize, r: Vec<Vec<f64>>, nu: f64, a: f64) -> Result<Self, ModelError> {
        let m = Self { dim, r, nu, a };
        m.check_parameters()?;
        Ok(m)
    }

    pub fn nvars(&self) -> usize {
        self.r.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.r.len(), self.r.len(), |i, j| self.r[i][j])
    }

    fn base(&self) -> MaternParams {
        MaternParams {
            sigma2: 1.0,
            nu: self.nu,
            a: self.a,
        }
    }

    pub fn check_parameters(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::InvalidParameter(
                "dim must be at least 1".into(),
            ));
        }
        MaternParams::new(1.0, self.nu, self.a)?;
        check_positive_definite(&square_matrix(&self.r, "matrix r")?)
    }
}

fn check_positive_definite(r: &DMatrix<f64>) -> Result<(), ModelError> {
    let sym = (r - r.transpose()).abs().max();
    if sym > 1e-12 * r.abs().max() {
        return Err(ModelError::NotPositiveDefinite(
            "matrix is not symmetric".into(),
        ));
    }
    if r.clone().cholesky().is_none() {
        return Err(ModelError::NotPositiveDefinite(
            "matrix has a nonpositive eigenvalue".into(),
        ));
    }
    Ok(())
}

/// Frequency-independent squared coherence `r_ij r_ji / (r_ii r_jj)` of a
/// separable model.
pub fn separable_coherence(r: &DMatrix<f64>, i: usize, j: usize) -> Result<f64, ModelError> {
    if !r.is_square() || i >= r.nrows() || j >= r.nrows() {
        return Err(ModelError::InvalidParameter(format!(
            "pair ({i}, {j}) out of range for a {}×{} matrix",
            r.nrows(),
            r.ncols()
        )));
    }
    check_positive_definite(r)?;
    Ok(r[(i, j)] * r[(j, i)] / (r[(i, i)] * r[(j, j)]))
}

impl SpectralModel for SeparableModel {
    fn nvars(&self) -> usize {
        self.r.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn spectral_matrix(&self, omega: &[f64]) -> SpectralMatrix {
        let f = matern_sdf(omega, &self.base(), self.dim);
        SpectralMatrix::from_real(&self.matrix().scale(f))
    }

    fn frequency_scale(&self) -> (f64, f64) {
        (self.a, self.a)
    }
}

impl CovarianceModel for SeparableModel {
    fn covariance(&self, h: &[f64]) -> DMatrix<f64> {
        let r = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.matrix().scale(matern_correlation(r, self.nu, self.a))
    }
}
