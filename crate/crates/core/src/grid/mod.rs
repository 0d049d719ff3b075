//! Regular sampling grids, multivariate fields and their Fourier lattices.

mod field;
pub mod io;

pub use field::MultiField;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::FieldError;

/// A regular `d`-dimensional grid with `sizes[i]` points spaced `spacings[i]` apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    sizes: Vec<usize>,
    spacings: Vec<f64>,
}

impl GridSpec {
    pub fn new(sizes: Vec<usize>, spacings: Vec<f64>) -> Result<Self, FieldError> {
        if sizes.is_empty() {
            return Err(FieldError::InvalidGrid(
                "grid needs at least one axis".into(),
            ));
        }
        if sizes.len() != spacings.len() {
            return Err(FieldError::InvalidGrid(format!(
                "{} sizes but {} spacings",
                sizes.len(),
                spacings.len()
            )));
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(FieldError::InvalidGrid(format!("axis {i} has zero points")));
        }
        if let Some(i) = spacings.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(FieldError::InvalidGrid(format!(
                "axis {i} spacing {} is not positive",
                spacings[i]
            )));
        }
        Ok(Self { sizes, spacings })
    }

    /// Grid with unit spacing on every axis.
    pub fn unit(sizes: Vec<usize>) -> Result<Self, FieldError> {
        let spacings = vec![1.0; sizes.len()];
        Self::new(sizes, spacings)
    }

    pub fn dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Product of the spacings.
    pub fn cell_volume(&self) -> f64 {
        self.spacings.iter().product()
    }

    /// Multi-index of a row-major flat index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for axis in (0..self.dims()).rev() {
            idx[axis] = flat % self.sizes[axis];
            flat /= self.sizes[axis];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Coordinates of a grid point, origin at index zero.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .zip(&self.spacings)
            .map(|(&k, &s)| k as f64 * s)
            .collect()
    }

    /// Spacing between adjacent Fourier frequencies, `(2π)^d / (δ N)`.
    pub fn frequency_cell(&self) -> f64 {
        (2.0 * PI).powi(self.dims() as i32) / (self.cell_volume() * self.len() as f64)
    }
}

/// Signed frequency index of DFT bin `bin` on an axis with `n` points.
///
/// Bins up to `n / 2` keep their value, the rest wrap to negative indices, so
/// the index set is `{-(n-1)/2, ..., n/2}` (integer division).
pub fn signed_index(bin: usize, n: usize) -> i64 {
    if bin <= n / 2 {
        bin as i64
    } else {
        bin as i64 - n as i64
    }
}

/// DFT bin holding the signed frequency index `f`.
pub fn bin_of(f: i64, n: usize) -> usize {
    f.rem_euclid(n as i64) as usize
}

/// Fourier frequencies of a grid in ascending signed-index order (row-major
/// over axes), with the permutation to raw DFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    grid: GridSpec,
    freqs: Vec<f64>,
    indices: Vec<i64>,
    to_dft: Vec<usize>,
}

impl FrequencyGrid {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.to_dft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_dft.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.grid.dims()
    }

    /// Frequency vector (radians per distance unit) of lattice point `k`.
    pub fn omega(&self, k: usize) -> &[f64] {
        let d = self.dims();
        &self.freqs[k * d..(k + 1) * d]
    }

    /// Signed integer frequency indices of lattice point `k`.
    pub fn index(&self, k: usize) -> &[i64] {
        let d = self.dims();
        &self.indices[k * d..(k + 1) * d]
    }

    pub fn norm(&self, k: usize) -> f64 {
        self.omega(k).iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Row-major flat DFT position of lattice point `k`.
    pub fn dft_position(&self, k: usize) -> usize {
        self.to_dft[k]
    }

    pub fn dft_positions(&self) -> &[usize] {
        &self.to_dft
    }

    /// Lattice position of the zero frequency.
    pub fn zero_index(&self) -> usize {
        let idx: Vec<usize> = self.grid.sizes().iter().map(|&n| (n - 1) / 2).collect();
        self.grid.ravel(&idx)
    }

    /// Lattice position of `-ω` (mod the lattice period) for lattice point `k`.
    pub fn negated(&self, k: usize) -> usize {
        let sizes = self.grid.sizes();
        let idx: Vec<usize> = self
            .index(k)
            .iter()
            .zip(sizes)
            .map(|(&f, &n)| {
                let neg = signed_index(bin_of(-f, n), n);
                (neg + (n as i64 - 1) / 2) as usize
            })
            .collect();
        self.grid.ravel(&idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.freqs.chunks(self.dims())
    }
}

/// All Fourier frequencies `ω = 2π f / (δ n)` of a grid.
pub fn fourier_frequencies(grid: &GridSpec) -> FrequencyGrid {
    let d = grid.dims();
    let n_total = grid.len();
    let mut freqs = Vec::with_capacity(n_total * d);
    let mut indices = Vec::with_capacity(n_total * d);
    let mut to_dft = Vec::with_capacity(n_total);
    let offsets: Vec<i64> = grid.sizes().iter().map(|&n| (n as i64 - 1) / 2).collect();
    let mut bins = vec![0usize; d];
    for k in 0..n_total {
        let lattice = grid.unravel(k);
        for axis in 0..d {
            let n = grid.sizes()[axis];
            let f = lattice[axis] as i64 - offsets[axis];
            indices.push(f);
            freqs.push(2.0 * PI * f as f64 / (grid.spacings()[axis] * n as f64));
            bins[axis] = bin_of(f, n);
        }
        to_dft.push(grid.ravel(&bins));
    }
    FrequencyGrid {
        grid: grid.clone(),
        freqs,
        indices,
        to_dft,
    }
}
