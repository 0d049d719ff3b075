use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{matern_correlation, matern_sdf, square_matrix, CovarianceModel, MaternParams};
use super::{SpectralMatrix, SpectralModel};
use crate::error::ModelError;

/// Linear model of coregionalization `Z(s) = B W(s)` with independent Matérn
/// latent processes `W_1, …, W_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmcModel {
    pub dim: usize,
    /// Coregionalization matrix, row-major.
    pub b: Vec<Vec<f64>>,
    pub latent: Vec<MaternParams>,
}

impl LmcModel {
    pub fn new(
        dim: usize,
        b: Vec<Vec<f64>>,
        latent: Vec<MaternParams>,
    ) -> Result<Self, ModelError> {
        let m = Self { dim, b, latent };
        m.check_parameters()?;
        Ok(m)
    }

    pub fn nvars(&self) -> usize {
        self.b.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.b.len(), self.b.len(), |i, j| self.b[i][j])
    }

    pub fn check_parameters(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::InvalidParameter(
                "dim must be at least 1".into(),
            ));
        }
        square_matrix(&self.b, "coregionalization matrix b")?;
        if self.latent.len() != self.b.len() {
            return Err(ModelError::InvalidParameter(format!(
                "{} latent processes for a {}×{} coregionalization matrix",
                self.latent.len(),
                self.b.len(),
                self.b.len()
            )));
        }
        self.latent.iter().try_for_each(MaternParams::check)
    }

    fn sandwich(&self, diag: impl Fn(&MaternParams) -> f64) -> DMatrix<f64> {
        let b = self.matrix();
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.latent.len(),
            self.latent.iter().map(diag),
        ));
        &b * w * b.transpose()
    }
}

impl SpectralModel for LmcModel {
    fn nvars(&self) -> usize {
        self.b.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    /// `B diag(f_1(ω), …, f_p(ω)) Bᵀ`.
    fn spectral_matrix(&self, omega: &[f64]) -> SpectralMatrix {
        SpectralMatrix::from_real(&self.sandwich(|p| matern_sdf(omega, p, self.dim)))
    }

    fn frequency_scale(&self) -> (f64, f64) {
        self.latent
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
                (lo.min(p.a), hi.max(p.a))
            })
    }
}

impl CovarianceModel for LmcModel {
    fn covariance(&self, h: &[f64]) -> DMatrix<f64> {
        let r = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.sandwich(|p| p.sigma2 * matern_correlation(r, p.nu, p.a))
    }
}
