use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;

use super::{average, periodogram_of, smooth, PeriodogramField, SmoothingKernel};
use crate::error::EstimateError;
use crate::grid::{FrequencyGrid, MultiField};
use crate::models::{pair_phase_gain, PairSpectrum};

/// Squared coherence, phase and gain of one variable pair over the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceSummary {
    pub freqs: FrequencyGrid,
    pub pair: (usize, usize),
    pub nreps: usize,
    pub coh2: Vec<f64>,
    pub phase: Vec<f64>,
    pub gain: Vec<f64>,
    /// Frequencies where a marginal spectrum vanished; coherence was set to 0.
    pub zero_power: Vec<bool>,
}

impl CoherenceSummary {
    pub fn len(&self) -> usize {
        self.coh2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coh2.is_empty()
    }

    pub fn abs_coh(&self, k: usize) -> f64 {
        self.coh2[k].sqrt()
    }

    /// CSV with header `w1,…,wd,coh2,abs_coh,phase,gain`, lattice order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.freqs.dims();
        let mut header: Vec<String> = (1..=d).map(|a| format!("w{a}")).collect();
        header.extend(["coh2", "abs_coh", "phase", "gain"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.len() {
            for w in self.freqs.omega(k) {
                write!(out, "{w:.17e},")?;
            }
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.coh2[k],
                self.abs_coh(k),
                self.phase[k],
                self.gain[k]
            )?;
        }
        Ok(())
    }
}

/// `(γ², phase, gain, zero_power)` of one smoothed pair spectrum.
fn pair_summary(ps: &PairSpectrum) -> (f64, f64, f64, bool) {
    let zero = ps.f11 <= 0.0 || ps.f22 <= 0.0;
    let (gain, phase) = pair_phase_gain(ps).unwrap_or((0.0, 0.0));
    (ps.coherence2(), phase, gain, zero)
}

/// Estimated coherence `|Ĩ_kl|² / (Ĩ_kk Ĩ_ll)` from a smoothed periodogram.
///
/// Phase and gain are those of `Ĩ_kl / Ĩ_kk`.
pub fn coherence(
    pg: &PeriodogramField,
    k: usize,
    l: usize,
) -> Result<CoherenceSummary, EstimateError> {
    if !pg.is_smoothed() {
        return Err(EstimateError::Unsmoothed);
    }
    pg.check_var(k)?;
    pg.check_var(l)?;
    let n = pg.len();
    let mut s = CoherenceSummary {
        freqs: pg.freqs().clone(),
        pair: (k, l),
        nreps: 1,
        coh2: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
        gain: Vec::with_capacity(n),
        zero_power: Vec::with_capacity(n),
    };
    for f in 0..n {
        let (c, p, g, z) = pair_summary(&pg.pair(f, k, l));
        s.coh2.push(if k == l && !z { 1.0 } else { c });
        s.phase.push(p);
        s.gain.push(g);
        s.zero_power.push(z);
    }
    Ok(s)
}

/// Replicate pairing for the two variables of a coherence estimate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing(Vec<(usize, usize)>);

impl Pairing {
    /// Arbitrary `(replicate of k, replicate of l)` pairs.
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self(pairs)
    }

    /// Each replicate with itself.
    pub fn same(reps: usize) -> Self {
        Self((0..reps).map(|r| (r, r)).collect())
    }

    /// Replicate `d` of `k` with replicate `d - lag` of `l`, where both exist.
    pub fn lagged(reps: usize, lag: i64) -> Self {
        Self(
            (0..reps as i64)
                .filter_map(|d| {
                    let e = d - lag;
                    (0..reps as i64)
                        .contains(&e)
                        .then_some((d as usize, e as usize))
                })
                .collect(),
        )
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }
}

/// How replicate estimates are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Averaging {
    /// Mean of per-replicate squared coherences.
    #[default]
    Coherence,
    /// Coherence of the mean smoothed spectra.
    Spectra,
}

/// Replicate-averaged coherence of variables `k` and `l`.
///
/// Every pair `(r, s)` contributes the smoothed periodogram of
/// `(Z_k in replicate r, Z_l in replicate s)`. Phase and gain always come from
/// the replicate-averaged smoothed spectra.
pub fn replicate_coherence(
    field: &MultiField,
    pairing: &Pairing,
    k: usize,
    l: usize,
    kernel: &SmoothingKernel,
    averaging: Averaging,
) -> Result<CoherenceSummary, EstimateError> {
    if pairing.pairs().is_empty() {
        return Err(EstimateError::EmptyPairing);
    }
    let smoothed = pairing
        .pairs()
        .par_iter()
        .map(|&(r, s)| smooth(&periodogram_of(field, &[(r, k), (s, l)])?, kernel))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = average(&smoothed)?;
    let mut out = coherence(&mean, 0, 1)?;
    out.pair = (k, l);
    out.nreps = smoothed.len();
    if averaging == Averaging::Coherence {
        let per_rep: Vec<CoherenceSummary> = smoothed
            .iter()
            .map(|pg| coherence(pg, 0, 1))
            .collect::<Result<_, _>>()?;
        let scale = 1.0 / per_rep.len() as f64;
        for f in 0..out.len() {
            let total: f64 = per_rep.iter().map(|c| c.coh2[f]).sum();
            out.coh2[f] = total * scale;
        }
    }
    Ok(out)
}

/// Signed mean cross-spectrum `Ĩ_kl` of a pairing at lattice point `f`.
pub fn mean_cross_spectrum(
    field: &MultiField,
    pairing: &Pairing,
    k: usize,
    l: usize,
    kernel: &SmoothingKernel,
    f: usize,
) -> Result<Complex64, EstimateError> {
    let mut total = Complex64::new(0.0, 0.0);
    for &(r, s) in pairing.pairs() {
        total += smooth(&periodogram_of(field, &[(r, k), (s, l)])?, kernel)?.entry(f, 0, 1);
    }
    Ok(total / pairing.pairs().len().max(1) as f64)
}
