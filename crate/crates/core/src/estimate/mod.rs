//! Nonparametric spectral estimation: matrix-valued periodograms, smoothing
//! over the Fourier-frequency lattice, coherence/phase/gain estimates and
//! anomaly preprocessing.

mod anomalies;
mod coherence;
mod periodogram;
mod smoothing;

pub use anomalies::{nw_detrend, standardize_anomalies};
pub use coherence::{
    coherence, mean_cross_spectrum, replicate_coherence, Averaging, CoherenceSummary, Pairing,
};
pub use periodogram::{
    average, mean_periodogram, periodogram, periodogram_of, PeriodogramField, RepLabel,
};
pub use smoothing::{smooth, Boundary, SmoothingKernel};
