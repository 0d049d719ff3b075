use num_complex::Complex64;

use super::GridSpec;
use crate::error::FieldError;

/// A `p`-variate field sampled on a grid, with `R` replicates.
///
/// Values are stored in (replicate, variable, grid row-major) order.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiField {
    grid: GridSpec,
    nvars: usize,
    reps: usize,
    real: bool,
    values: Vec<Complex64>,
}

impl MultiField {
    pub fn new(
        grid: GridSpec,
        nvars: usize,
        reps: usize,
        values: Vec<Complex64>,
    ) -> Result<Self, FieldError> {
        if nvars == 0 || reps == 0 {
            return Err(FieldError::InvalidGrid(
                "field needs at least one variable and one replicate".into(),
            ));
        }
        let expected = grid.len() * nvars * reps;
        if values.len() != expected {
            return Err(FieldError::SizeMismatch {
                expected,
                got: values.len(),
            });
        }
        let real = values.iter().all(|z| z.im.to_bits() == 0);
        Ok(Self {
            grid,
            nvars,
            reps,
            real,
            values,
        })
    }

    pub fn from_real(
        grid: GridSpec,
        nvars: usize,
        reps: usize,
        values: Vec<f64>,
    ) -> Result<Self, FieldError> {
        Self::new(
            grid,
            nvars,
            reps,
            values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn zeros(grid: GridSpec, nvars: usize, reps: usize) -> Result<Self, FieldError> {
        let n = grid.len() * nvars * reps;
        Self::new(grid, nvars, reps, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    /// True when every value has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    fn offset(&self, rep: usize, var: usize) -> usize {
        assert!(
            rep < self.reps && var < self.nvars,
            "field slice out of range"
        );
        (rep * self.nvars + var) * self.grid.len()
    }

    /// Grid values of one variable in one replicate.
    pub fn slice(&self, rep: usize, var: usize) -> &[Complex64] {
        let start = self.offset(rep, var);
        &self.values[start..start + self.grid.len()]
    }

    pub fn slice_mut(&mut self, rep: usize, var: usize) -> &mut [Complex64] {
        let start = self.offset(rep, var);
        let n = self.grid.len();
        &mut self.values[start..start + n]
    }

    pub fn get(&self, rep: usize, var: usize, cell: usize) -> Complex64 {
        self.slice(rep, var)[cell]
    }

    /// Recompute the `real` flag after in-place edits.
    pub(crate) fn refresh_real(&mut self) {
        self.real = self.values.iter().all(|z| z.im.to_bits() == 0);
    }

    /// Keep the given replicates, in order.
    pub fn select_reps(&self, reps: &[usize]) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(reps.len() * self.nvars * self.grid.len());
        for &r in reps {
            if r >= self.reps {
                return Err(FieldError::InvalidGrid(format!(
                    "replicate {r} out of range"
                )));
            }
            for v in 0..self.nvars {
                values.extend_from_slice(self.slice(r, v));
            }
        }
        Self::new(self.grid.clone(), self.nvars, reps.len(), values)
    }

    /// Circularly shift every slice by `shift[i]` cells along axis `i`.
    pub fn circular_shift(&self, shift: &[i64]) -> Self {
        assert_eq!(shift.len(), self.grid.dims());
        let n = self.grid.len();
        let sizes = self.grid.sizes().to_vec();
        let mut out = self.clone();
        for r in 0..self.reps {
            for v in 0..self.nvars {
                let src = self.slice(r, v);
                let dst = out.slice_mut(r, v);
                for (flat, &z) in src.iter().enumerate().take(n) {
                    let idx: Vec<usize> = self
                        .grid
                        .unravel(flat)
                        .iter()
                        .zip(&sizes)
                        .zip(shift)
                        .map(|((&i, &m), &s)| (i as i64 + s).rem_euclid(m as i64) as usize)
                        .collect();
                    dst[self.grid.ravel(&idx)] = z;
                }
            }
        }
        out
    }
}
