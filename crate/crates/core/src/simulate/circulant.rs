//! Multivariate circulant embedding.
//!
//! The covariance is evaluated on a periodic grid of `M = 2 n · factor` cells
//! per axis. Its DFT is a Hermitian `p × p` matrix `Λ(ξ)` per embedded
//! frequency; when every `Λ(ξ)` is nonnegative definite the real part of
//! `IDFT(Λ^{1/2} ε / √M)` with complex standard normal `ε` has exactly the
//! target covariance on the original grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use super::{normals, stream};
use crate::error::SimError;
use crate::fft;
use crate::grid::{signed_index, GridSpec};
use crate::models::{BaseProcess, CovarianceModel, ModelSpec};

/// Largest embedding expansion factor tried before giving up.
pub const MAX_EXPANSION: usize = 8;

/// Relative tolerance on negative embedded eigenvalues, which are clipped.
const CLIP_TOLERANCE: f64 = 1e-10;

enum Source {
    /// Per embedded frequency, a row-major `p × p` square root of `Λ(ξ)`.
    Joint { roots: Vec<Complex64> },
    /// One base process filtered by per-variable transfer functions.
    Filtered {
        base_root: Vec<f64>,
        transfers: Vec<Vec<f64>>,
    },
}

pub struct CirculantPlan {
    grid: GridSpec,
    nvars: usize,
    embed: Vec<usize>,
    offset: Vec<usize>,
    source: Source,
}

fn embedded_lag(grid: &GridSpec, sizes: &[usize], flat: usize) -> Vec<f64> {
    let mut rem = flat;
    let mut lag = vec![0.0; sizes.len()];
    for axis in (0..sizes.len()).rev() {
        let m = sizes[axis];
        let j = rem % m;
        rem /= m;
        let signed = if j <= m / 2 {
            j as i64
        } else {
            j as i64 - m as i64
        };
        lag[axis] = signed as f64 * grid.spacings()[axis];
    }
    lag
}

fn embedded_omega(grid: &GridSpec, sizes: &[usize], flat: usize) -> Vec<f64> {
    let mut rem = flat;
    let mut w = vec![0.0; sizes.len()];
    for axis in (0..sizes.len()).rev() {
        let m = sizes[axis];
        let f = signed_index(rem % m, m);
        rem /= m;
        w[axis] = 2.0 * PI * f as f64 / (grid.spacings()[axis] * m as f64);
    }
    w
}

/// DFT of every covariance entry on the embedding grid, as `p × p` blocks.
fn embedded_spectra(
    cov: &dyn CovarianceModel,
    grid: &GridSpec,
    sizes: &[usize],
) -> Vec<DMatrix<Complex64>> {
    let p = cov.nvars();
    let total: usize = sizes.iter().product();
    let mut entries = vec![vec![Complex64::new(0.0, 0.0); total]; p * p];
    for flat in 0..total {
        let c = cov.covariance(&embedded_lag(grid, sizes, flat));
        for i in 0..p {
            for j in 0..p {
                entries[i * p + j][flat] = Complex64::new(c[(i, j)], 0.0);
            }
        }
    }
    for e in entries.iter_mut() {
        fft::forward(e, sizes);
    }
    (0..total)
        .map(|f| DMatrix::from_fn(p, p, |i, j| entries[i * p + j][f]))
        .collect()
}

/// Hermitian square roots, or `None` if some eigenvalue is too negative.
fn matrix_roots(spectra: &[DMatrix<Complex64>]) -> Option<Vec<Complex64>> {
    let eig: Vec<_> = spectra
        .iter()
        .map(|m| ((m + m.adjoint()).scale(0.5)).symmetric_eigen())
        .collect();
    let top = eig
        .iter()
        .flat_map(|e| e.eigenvalues.iter().copied())
        .fold(0.0f64, f64::max);
    let floor = -CLIP_TOLERANCE * top;
    let mut out = Vec::with_capacity(spectra.len() * spectra.first().map_or(0, |m| m.len()));
    for e in eig {
        if e.eigenvalues.iter().any(|&l| l < floor) {
            return None;
        }
        let sqrt = e
            .eigenvalues
            .map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
        let u = &e.eigenvectors;
        let root = u * DMatrix::from_diagonal(&sqrt) * u.adjoint();
        let p = root.nrows();
        for i in 0..p {
            for j in 0..p {
                out.push(root[(i, j)]);
            }
        }
    }
    Some(out)
}

impl CirculantPlan {
    pub fn new(model: &ModelSpec, grid: &GridSpec) -> Result<Self, SimError> {
        match model {
            ModelSpec::Convolution(m) => Self::filtered(m, grid),
            other => {
                let cov = other
                    .as_covariance()
                    .ok_or_else(|| SimError::Unsupported("model has no covariance".into()))?;
                Self::joint(cov, grid)
            }
        }
    }

    fn joint(cov: &dyn CovarianceModel, grid: &GridSpec) -> Result<Self, SimError> {
        let mut factor = 1;
        while factor <= MAX_EXPANSION {
            let embed: Vec<usize> = grid.sizes().iter().map(|&n| 2 * n * factor).collect();
            if let Some(roots) = matrix_roots(&embedded_spectra(cov, grid, &embed)) {
                return Ok(Self {
                    grid: grid.clone(),
                    nvars: cov.nvars(),
                    offset: vec![0; grid.dims()],
                    embed,
                    source: Source::Joint { roots },
                });
            }
            factor *= 2;
        }
        Err(SimError::EmbeddingFailed)
    }

    fn filtered(m: &crate::models::ConvolutionModel, grid: &GridSpec) -> Result<Self, SimError> {
        let pad: Vec<usize> = grid
            .spacings()
            .iter()
            .map(|&s| (m.reach() / s).ceil() as usize)
            .collect();
        let padded: Vec<usize> = grid
            .sizes()
            .iter()
            .zip(&pad)
            .map(|(&n, &q)| n + 2 * q)
            .collect();
        let (embed, base_root) = match m.base {
            BaseProcess::White { variance } => {
                let total: usize = padded.iter().product();
                // Discrete white noise with per-cell variance v/δ matches the
                // continuous intensity v; its embedded spectrum is flat.
                let lambda = variance / grid.cell_volume();
                (padded, vec![lambda.sqrt(); total])
            }
            BaseProcess::Matern(p) => {
                let base = crate::models::MultiMaternModel::new(m.dim, vec![p], vec![])?;
                let padded_grid = GridSpec::new(padded, grid.spacings().to_vec())?;
                let plan = Self::joint(&base, &padded_grid)?;
                let Source::Joint { roots } = plan.source else {
                    unreachable!("joint plan")
                };
                (plan.embed, roots.iter().map(|z| z.re).collect())
            }
        };
        let total: usize = embed.iter().product();
        let transfers = m
            .kernels
            .iter()
            .map(|k| {
                (0..total)
                    .map(|f| k.transfer(&embedded_omega(grid, &embed, f)))
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            nvars: m.nvars(),
            embed,
            offset: pad,
            source: Source::Filtered {
                base_root,
                transfers,
            },
        })
    }

    /// Embedding grid sizes actually used.
    pub fn embedding(&self) -> &[usize] {
        &self.embed
    }

    fn complex_noise(&self, seed: u64, rep: usize, var: usize) -> Vec<Complex64> {
        let total: usize = self.embed.iter().product();
        let z = normals(&mut stream(seed, rep, var), 2 * total);
        z.chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect()
    }

    fn crop(&self, full: &[Complex64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.len());
        let mut pos = vec![0usize; self.embed.len()];
        for flat in 0..self.grid.len() {
            let idx = self.grid.unravel(flat);
            for axis in 0..idx.len() {
                pos[axis] = idx[axis] + self.offset[axis];
            }
            let mut e = 0;
            for axis in 0..pos.len() {
                e = e * self.embed[axis] + pos[axis];
            }
            out.push(full[e].re);
        }
        out
    }

    /// One replicate, variables concatenated.
    pub fn draw(&self, seed: u64, rep: usize) -> Vec<f64> {
        let total: usize = self.embed.iter().product();
        let scale = 1.0 / (total as f64).sqrt();
        let p = self.nvars;
        let mut out = Vec::with_capacity(p * self.grid.len());
        match &self.source {
            Source::Joint { roots } => {
                let eps: Vec<Vec<Complex64>> =
                    (0..p).map(|v| self.complex_noise(seed, rep, v)).collect();
                for i in 0..p {
                    let mut y: Vec<Complex64> = (0..total)
                        .map(|f| {
                            let row = &roots[(f * p + i) * p..(f * p + i + 1) * p];
                            row.iter()
                                .zip(&eps)
                                .map(|(l, e)| l * e[f])
                                .sum::<Complex64>()
                                * scale
                        })
                        .collect();
                    fft::inverse(&mut y, &self.embed);
                    out.extend(self.crop(&y));
                }
            }
            Source::Filtered {
                base_root,
                transfers,
            } => {
                let eps = self.complex_noise(seed, rep, 0);
                for g in transfers {
                    let mut y: Vec<Complex64> = (0..total)
                        .map(|f| eps[f] * (base_root[f] * g[f] * scale))
                        .collect();
                    fft::inverse(&mut y, &self.embed);
                    out.extend(self.crop(&y));
                }
            }
        }
        out
    }
}
