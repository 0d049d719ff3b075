use num_complex::Complex64;
use rayon::prelude::*;

use super::PeriodogramField;
use crate::error::EstimateError;

/// How the stencil treats lattice points beyond the highest frequency.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    /// Wrap around: the Fourier lattice is periodic.
    #[default]
    Periodic,
    /// Drop out-of-lattice taps and renormalize the remaining weights.
    Truncate,
}

/// Odd-sized `d`-dimensional stencil of nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingKernel {
    sizes: Vec<usize>,
    weights: Vec<f64>,
    boundary: Boundary,
}

impl SmoothingKernel {
    /// Stencil from row-major weights; weights are rescaled to sum to one.
    pub fn new(
        sizes: Vec<usize>,
        weights: Vec<f64>,
        boundary: Boundary,
    ) -> Result<Self, EstimateError> {
        if sizes.is_empty() || sizes.iter().any(|&s| s % 2 == 0) {
            return Err(EstimateError::InvalidKernel(format!(
                "stencil extents must be odd, got {sizes:?}"
            )));
        }
        let n: usize = sizes.iter().product();
        if weights.len() != n {
            return Err(EstimateError::InvalidKernel(format!(
                "{} weights for a stencil of {n} cells",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(EstimateError::InvalidKernel(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(EstimateError::InvalidKernel("weights sum to zero".into()));
        }
        Ok(Self {
            sizes,
            weights: weights.into_iter().map(|w| w / total).collect(),
            boundary,
        })
    }

    /// Single unit tap: smoothing is the identity.
    pub fn delta(dims: usize) -> Self {
        Self::new(vec![1; dims], vec![1.0], Boundary::Periodic).expect("valid stencil")
    }

    /// Constant block of the given odd width on every axis.
    pub fn boxcar(dims: usize, width: usize) -> Result<Self, EstimateError> {
        let n = width.pow(dims as u32);
        Self::new(vec![width; dims], vec![1.0; n], Boundary::Periodic)
    }

    /// The 3 × 3 block of 1/9.
    pub fn box3() -> Self {
        Self::boxcar(2, 3).expect("valid stencil")
    }

    /// Parse whitespace- or comma-separated weights, one stencil row per line.
    /// A single line is a 1-d stencil; several lines form a 2-d stencil.
    pub fn parse(text: &str) -> Result<Self, EstimateError> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| EstimateError::InvalidKernel(format!("bad weight {t:?}")))
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(EstimateError::InvalidKernel(
                "stencil rows must be non-empty and equally long".into(),
            ));
        }
        let sizes = if rows.len() == 1 {
            vec![width]
        } else {
            vec![rows.len(), width]
        };
        Self::new(sizes, rows.concat(), Boundary::Periodic)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `(signed offset per axis, weight)` for every tap with nonzero weight.
    fn taps(&self) -> Vec<(Vec<i64>, f64)> {
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.sizes.len()];
        for &w in &self.weights {
            if w > 0.0 {
                let off = idx
                    .iter()
                    .zip(&self.sizes)
                    .map(|(&i, &s)| i as i64 - (s / 2) as i64)
                    .collect();
                out.push((off, w));
            }
            for axis in (0..idx.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < self.sizes[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        out
    }
}

/// Weight-normalized stencil convolution of every matrix entry over the
/// Fourier-frequency lattice.
pub fn smooth(
    pg: &PeriodogramField,
    kernel: &SmoothingKernel,
) -> Result<PeriodogramField, EstimateError> {
    let grid = pg.freqs().grid();
    if kernel.dims() != grid.dims() {
        return Err(EstimateError::InvalidKernel(format!(
            "{}-d stencil on a {}-d lattice",
            kernel.dims(),
            grid.dims()
        )));
    }
    for (axis, (&s, &n)) in kernel.sizes().iter().zip(grid.sizes()).enumerate() {
        if s > n {
            return Err(EstimateError::StencilTooLarge {
                axis,
                stencil: s,
                grid: n,
            });
        }
    }
    let taps = kernel.taps();
    let sizes = grid.sizes();
    let p2 = pg.nvars() * pg.nvars();
    let src = pg.raw();
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    out.par_chunks_mut(p2).enumerate().for_each(|(k, block)| {
        let here = grid.unravel(k);
        let mut used = 0.0;
        let mut pos = vec![0usize; sizes.len()];
        for (off, w) in &taps {
            let mut inside = true;
            for axis in 0..sizes.len() {
                let n = sizes[axis] as i64;
                let j = here[axis] as i64 + off[axis];
                pos[axis] = match kernel.boundary() {
                    Boundary::Periodic => j.rem_euclid(n) as usize,
                    Boundary::Truncate if (0..n).contains(&j) => j as usize,
                    Boundary::Truncate => {
                        inside = false;
                        0
                    }
                };
            }
            if !inside {
                continue;
            }
            used += w;
            let start = grid.ravel(&pos) * p2;
            for (acc, v) in block.iter_mut().zip(&src[start..start + p2]) {
                *acc += v * w;
            }
        }
        if kernel.boundary() == Boundary::Truncate {
            block.iter_mut().for_each(|z| *z /= used);
        }
    });
    Ok(pg.with_values(out, true))
}
