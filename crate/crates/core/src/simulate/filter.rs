use super::{simulate, Method, SimRequest};
use crate::error::SimError;
use crate::grid::{GridSpec, MultiField};
use crate::models::{ModelSpec, SpectralModel};

/// A 3 × 3 stencil, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterStencil(pub [f64; 9]);

impl FilterStencil {
    /// Every weight 1/9.
    pub fn low_pass() -> Self {
        Self([1.0 / 9.0; 9])
    }

    /// −1/9 on the eight edge cells and 8/9 in the centre; sums to zero.
    pub fn high_pass() -> Self {
        let mut w = [-1.0 / 9.0; 9];
        w[4] = 8.0 / 9.0;
        Self(w)
    }
}

/// Valid 3 × 3 convolution: the output grid loses one cell on every side.
pub fn filter2d(field: &MultiField, stencil: &FilterStencil) -> Result<MultiField, SimError> {
    let g = field.grid();
    if g.dims() != 2 || g.sizes().iter().any(|&n| n < 3) {
        return Err(SimError::GridTooSmall(format!(
            "3x3 filtering needs a 2-d grid with at least 3 cells per axis, got {:?}",
            g.sizes()
        )));
    }
    let (n1, n2) = (g.sizes()[0], g.sizes()[1]);
    let out_grid = GridSpec::new(vec![n1 - 2, n2 - 2], g.spacings().to_vec())?;
    let mut values = Vec::with_capacity(out_grid.len() * field.nvars() * field.reps());
    for r in 0..field.reps() {
        for v in 0..field.nvars() {
            let src = field.slice(r, v);
            for i in 1..n1 - 1 {
                for j in 1..n2 - 1 {
                    let mut acc = num_complex::Complex64::new(0.0, 0.0);
                    for di in 0..3 {
                        for dj in 0..3 {
                            acc += src[(i + di - 1) * n2 + (j + dj - 1)] * stencil.0[di * 3 + dj];
                        }
                    }
                    values.push(acc);
                }
            }
        }
    }
    Ok(MultiField::new(
        out_grid,
        field.nvars(),
        field.reps(),
        values,
    )?)
}

/// Pearson correlation of two equally long samples.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilteredCorrelation {
    pub raw: f64,
    pub low: f64,
    pub high: f64,
    pub nreps: usize,
}

fn pooled_correlation(field: &MultiField) -> f64 {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in 0..field.reps() {
        x.extend(field.slice(r, 0).iter().map(|z| z.re));
        y.extend(field.slice(r, 1).iter().map(|z| z.re));
    }
    pearson(&x, &y)
}

/// Simulate a bivariate model, low- and high-pass filter both variables and
/// return the Pearson correlations between them, pooled over replicates.
pub fn filtered_correlation(
    model: &ModelSpec,
    grid: &GridSpec,
    reps: usize,
    seed: u64,
) -> Result<FilteredCorrelation, SimError> {
    if model.nvars() != 2 {
        return Err(SimError::Unsupported(format!(
            "filtering experiment needs a bivariate model, got {} variables",
            model.nvars()
        )));
    }
    let field = simulate(&SimRequest {
        model,
        grid: grid.clone(),
        reps,
        seed,
        method: Method::Circulant,
    })?;
    let low = filter2d(&field, &FilterStencil::low_pass())?;
    let high = filter2d(&field, &FilterStencil::high_pass())?;
    Ok(FilteredCorrelation {
        raw: pooled_correlation(&field),
        low: pooled_correlation(&low),
        high: pooled_correlation(&high),
        nreps: reps,
    })
}
