//! Anomaly preprocessing across replicates (e.g. days) at each grid cell.

use num_complex::Complex64;

use crate::error::EstimateError;
use crate::grid::MultiField;

fn need_reps(field: &MultiField) -> Result<(), EstimateError> {
    if field.reps() < 2 {
        return Err(EstimateError::TooFewReplicates {
            needed: 2,
            got: field.reps(),
        });
    }
    Ok(())
}

/// Subtract the across-replicate mean and divide by the across-replicate
/// standard deviation (denominator `R - 1`), per cell and variable.
pub fn standardize_anomalies(field: &MultiField) -> Result<MultiField, EstimateError> {
    need_reps(field)?;
    let reps = field.reps();
    let mut out = field.clone();
    for var in 0..field.nvars() {
        for cell in 0..field.grid().len() {
            let series: Vec<Complex64> = (0..reps).map(|r| field.get(r, var, cell)).collect();
            let mean = series.iter().sum::<Complex64>() / reps as f64;
            let ss: f64 = series.iter().map(|z| (z - mean).norm_sqr()).sum();
            let sd = (ss / (reps - 1) as f64).sqrt();
            if sd == 0.0 || !sd.is_finite() {
                return Err(EstimateError::ZeroVariance { var, cell });
            }
            for (r, z) in series.iter().enumerate() {
                out.slice_mut(r, var)[cell] = (z - mean) / sd;
            }
        }
    }
    out.refresh_real();
    Ok(out)
}

/// Subtract a Nadaraya–Watson estimate of the mean with Gaussian weights
/// `exp(-(d - e)² / (2 bw²))` over replicate index, per cell and variable.
/// An infinite bandwidth subtracts the global mean.
pub fn nw_detrend(field: &MultiField, bandwidth: f64) -> Result<MultiField, EstimateError> {
    need_reps(field)?;
    if !(bandwidth > 0.0) {
        return Err(EstimateError::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let reps = field.reps();
    let weights: Vec<Vec<f64>> = (0..reps)
        .map(|d| {
            (0..reps)
                .map(|e| {
                    let t = (d as f64 - e as f64) / bandwidth;
                    (-0.5 * t * t).exp()
                })
                .collect()
        })
        .collect();
    let mut out = field.clone();
    for var in 0..field.nvars() {
        for cell in 0..field.grid().len() {
            let series: Vec<Complex64> = (0..reps).map(|r| field.get(r, var, cell)).collect();
            for (d, w) in weights.iter().enumerate() {
                let total: f64 = w.iter().sum();
                let trend = w
                    .iter()
                    .zip(&series)
                    .map(|(wi, z)| z * wi)
                    .sum::<Complex64>()
                    / total;
                out.slice_mut(d, var)[cell] = series[d] - trend;
            }
        }
    }
    out.refresh_real();
    Ok(out)
}
