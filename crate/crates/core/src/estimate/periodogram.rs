use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

use crate::error::EstimateError;
use crate::fft;
use crate::grid::{fourier_frequencies, FrequencyGrid, MultiField};
use crate::models::{PairSpectrum, SpectralMatrix};

/// Which data a periodogram was computed from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RepLabel {
    Single(usize),
    /// Variables drawn from several replicates, e.g. a lagged pairing.
    Mixed(Vec<usize>),
    Averaged(usize),
}

/// Matrix-valued periodogram over the Fourier-frequency lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodogramField {
    freqs: FrequencyGrid,
    nvars: usize,
    /// One row-major `p × p` block per lattice frequency.
    mats: Vec<Complex64>,
    smoothed: bool,
    rep: RepLabel,
}

impl PeriodogramField {
    pub(crate) fn from_parts(
        freqs: FrequencyGrid,
        nvars: usize,
        mats: Vec<Complex64>,
        smoothed: bool,
        rep: RepLabel,
    ) -> Self {
        assert_eq!(mats.len(), freqs.len() * nvars * nvars);
        Self {
            freqs,
            nvars,
            mats,
            smoothed,
            rep,
        }
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn is_smoothed(&self) -> bool {
        self.smoothed
    }

    pub fn rep(&self) -> &RepLabel {
        &self.rep
    }

    pub(crate) fn raw(&self) -> &[Complex64] {
        &self.mats
    }

    pub(crate) fn with_values(&self, mats: Vec<Complex64>, smoothed: bool) -> Self {
        Self::from_parts(
            self.freqs.clone(),
            self.nvars,
            mats,
            smoothed,
            self.rep.clone(),
        )
    }

    /// Entry `(i, j)` at lattice frequency `k`.
    pub fn entry(&self, k: usize, i: usize, j: usize) -> Complex64 {
        let p = self.nvars;
        self.mats[(k * p + i) * p + j]
    }

    pub fn matrix(&self, k: usize) -> SpectralMatrix {
        let p = self.nvars;
        let block = &self.mats[k * p * p..(k + 1) * p * p];
        SpectralMatrix::from_matrix(nalgebra::DMatrix::from_row_slice(p, p, block))
    }

    pub fn pair(&self, k: usize, i: usize, j: usize) -> PairSpectrum {
        PairSpectrum::new(
            self.entry(k, i, i).re,
            self.entry(k, j, j).re,
            self.entry(k, i, j),
        )
    }

    /// Diagonal entry `I_ii` over the lattice.
    pub fn diagonal(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.entry(k, i, i).re).collect()
    }

    pub fn check_var(&self, i: usize) -> Result<(), EstimateError> {
        if i >= self.nvars {
            return Err(EstimateError::VariableOutOfRange {
                index: i,
                nvars: self.nvars,
            });
        }
        Ok(())
    }

    /// Long-format CSV: `w1,…,wd,k,l,re,im`, lattice order then row-major entries.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.freqs.dims();
        let header: Vec<String> = (1..=d)
            .map(|a| format!("w{a}"))
            .chain(["k", "l", "re", "im"].map(String::from))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for f in 0..self.len() {
            let w: Vec<String> = self
                .freqs
                .omega(f)
                .iter()
                .map(|x| format!("{x:.17e}"))
                .collect();
            let w = w.join(",");
            for i in 0..self.nvars {
                for j in 0..self.nvars {
                    let z = self.entry(f, i, j);
                    writeln!(out, "{w},{i},{j},{:.17e},{:.17e}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }
}

/// `δ / ((2π)^d N)`: the factor turning `S_k conj(S_l)` into a periodogram.
pub(crate) fn normalization(field_grid: &crate::grid::GridSpec) -> f64 {
    field_grid.cell_volume() / ((2.0 * PI).powi(field_grid.dims() as i32) * field_grid.len() as f64)
}

/// Discrete Fourier sums `S(ω) = Σ_j Z(s_j) exp(-i s_jᵀω)` in lattice order.
fn fourier_sums(values: &[Complex64], freqs: &FrequencyGrid) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    fft::forward(&mut buf, freqs.grid().sizes());
    freqs.dft_positions().iter().map(|&pos| buf[pos]).collect()
}

/// Periodogram of the listed `(replicate, variable)` series, treated as the
/// variables of one multivariate field.
pub fn periodogram_of(
    field: &MultiField,
    series: &[(usize, usize)],
) -> Result<PeriodogramField, EstimateError> {
    if series.is_empty() {
        return Err(EstimateError::InvalidArgument("no series selected".into()));
    }
    for &(rep, var) in series {
        if rep >= field.reps() {
            return Err(EstimateError::ReplicateOutOfRange {
                index: rep,
                reps: field.reps(),
            });
        }
        if var >= field.nvars() {
            return Err(EstimateError::VariableOutOfRange {
                index: var,
                nvars: field.nvars(),
            });
        }
    }
    let freqs = fourier_frequencies(field.grid());
    let c = normalization(field.grid());
    let sums: Vec<Vec<Complex64>> = series
        .iter()
        .map(|&(rep, var)| fourier_sums(field.slice(rep, var), &freqs))
        .collect();
    let p = series.len();
    let mut mats = vec![Complex64::new(0.0, 0.0); freqs.len() * p * p];
    mats.par_chunks_mut(p * p)
        .enumerate()
        .for_each(|(f, block)| {
            // Upper triangle computed once and mirrored, so the matrix is exactly Hermitian.
            for i in 0..p {
                block[i * p + i] = Complex64::new(c * sums[i][f].norm_sqr(), 0.0);
                for j in i + 1..p {
                    let v = c * sums[i][f] * sums[j][f].conj();
                    block[i * p + j] = v;
                    block[j * p + i] = v.conj();
                }
            }
        });
    let mut reps: Vec<usize> = series.iter().map(|s| s.0).collect();
    reps.sort_unstable();
    reps.dedup();
    let rep = if reps.len() == 1 {
        RepLabel::Single(reps[0])
    } else {
        RepLabel::Mixed(reps)
    };
    Ok(PeriodogramField::from_parts(freqs, p, mats, false, rep))
}

/// Matrix-valued periodogram
/// `I_kl(ω) = δ / ((2π)^d N) · S_k(ω) conj(S_l(ω))` of one replicate.
pub fn periodogram(field: &MultiField, rep: usize) -> Result<PeriodogramField, EstimateError> {
    let series: Vec<(usize, usize)> = (0..field.nvars()).map(|v| (rep, v)).collect();
    periodogram_of(field, &series)
}

/// Pointwise mean of periodograms on a common lattice, summed in input order.
pub fn average(pgs: &[PeriodogramField]) -> Result<PeriodogramField, EstimateError> {
    let first = pgs.first().ok_or(EstimateError::EmptyPairing)?;
    if pgs
        .iter()
        .any(|p| p.freqs != first.freqs || p.nvars != first.nvars)
    {
        return Err(EstimateError::InvalidArgument(
            "periodograms live on different lattices".into(),
        ));
    }
    let mut mats = vec![Complex64::new(0.0, 0.0); first.mats.len()];
    for pg in pgs {
        for (acc, v) in mats.iter_mut().zip(&pg.mats) {
            *acc += v;
        }
    }
    let scale = 1.0 / pgs.len() as f64;
    mats.iter_mut().for_each(|z| *z *= scale);
    Ok(PeriodogramField::from_parts(
        first.freqs.clone(),
        first.nvars,
        mats,
        pgs.iter().all(|p| p.smoothed),
        RepLabel::Averaged(pgs.len()),
    ))
}

/// Mean raw periodogram over all replicates of a field.
pub fn mean_periodogram(field: &MultiField) -> Result<PeriodogramField, EstimateError> {
    let pgs = (0..field.reps())
        .into_par_iter()
        .map(|r| periodogram(field, r))
        .collect::<Result<Vec<_>, _>>()?;
    average(&pgs)
}
