use nalgebra::{DMatrix, DVector};

use super::{normals, stream};
use crate::error::SimError;
use crate::grid::GridSpec;
use crate::models::CovarianceModel;

/// Largest `N · p` the dense path will factorize.
pub const DENSE_LIMIT: usize = 8192;

/// Cholesky factor of the full `Np × Np` covariance, ordered (variable, cell).
pub struct DensePlan {
    factor: DMatrix<f64>,
    nvars: usize,
    ncells: usize,
}

impl DensePlan {
    pub fn new(cov: &dyn CovarianceModel, grid: &GridSpec) -> Result<Self, SimError> {
        let p = cov.nvars();
        let n = grid.len();
        let size = n * p;
        if size > DENSE_LIMIT {
            return Err(SimError::TooLargeForDense {
                size,
                limit: DENSE_LIMIT,
            });
        }
        let coords: Vec<Vec<f64>> = (0..n).map(|c| grid.coords(c)).collect();
        let mut sigma = DMatrix::<f64>::zeros(size, size);
        let mut h = vec![0.0; grid.dims()];
        for a in 0..n {
            for b in 0..=a {
                for (axis, slot) in h.iter_mut().enumerate() {
                    *slot = coords[a][axis] - coords[b][axis];
                }
                let c = cov.covariance(&h);
                for i in 0..p {
                    for j in 0..p {
                        sigma[(i * n + a, j * n + b)] = c[(i, j)];
                        sigma[(j * n + b, i * n + a)] = c[(i, j)];
                    }
                }
            }
        }
        let jitter = 1e-10 * sigma.trace() / size as f64;
        let factor = match sigma.clone().cholesky() {
            Some(ch) => ch.unpack(),
            None => {
                for k in 0..size {
                    sigma[(k, k)] += jitter;
                }
                sigma.cholesky().ok_or(SimError::Factorization)?.unpack()
            }
        };
        Ok(Self {
            factor,
            nvars: p,
            ncells: n,
        })
    }

    /// One replicate, variables concatenated.
    pub fn draw(&self, seed: u64, rep: usize) -> Vec<f64> {
        let eps: Vec<f64> = (0..self.nvars)
            .flat_map(|v| normals(&mut stream(seed, rep, v), self.ncells))
            .collect();
        (&self.factor * DVector::from_vec(eps)).data.into()
    }
}
