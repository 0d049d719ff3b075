//! Frequency-domain analysis of multivariate stationary random fields on
//! regular grids.
//!
//! The crate covers analytic spectral and coherence models ([`models`]),
//! periodogram-based estimation of spectra, coherence, phase and gain
//! ([`estimate`]), Gaussian field simulation ([`simulate`]) and
//! least-squares spectral fitting ([`fit`]). Fields live on a [`GridSpec`]
//! and are exchanged through the `MFLD1` file format in [`grid::io`].

pub mod error;
pub mod estimate;
mod fft;
pub mod fit;
pub mod grid;
pub mod models;
pub mod simulate;
pub mod special;

pub use error::{EstimateError, FieldError, FitError, ModelError, SimError};
pub use grid::{fourier_frequencies, FrequencyGrid, GridSpec, MultiField};
