//! Analytic spectral and coherence models.
//!
//! Every model maps a frequency `ω` to a Hermitian nonnegative-definite
//! [`SpectralMatrix`]. Pairwise quantities (coherence, phase, gain, optimal
//! linear transfer) are read off a [`PairSpectrum`].

mod convolution;
mod lmc;
mod matern;
mod separable;

pub use convolution::{convolution_pair_spectra, BaseProcess, ConvolutionModel, Kernel};
pub use lmc::LmcModel;
pub(crate) use matern::ln_unit_sdf;
pub use matern::{
    coherence_common_range, coherence_common_smoothness, matern_correlation, matern_cov,
    matern_sdf, mm_coherence, mm_coherence_at, mm_spectral_matrix, mm_validity_check, CrossEntry,
    CrossParams, MaternParams, MultiMaternModel, ValidityBudget,
};
pub use separable::{separable_coherence, SeparableModel};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::ModelError;

/// Relative tolerance on the smallest eigenvalue of a spectral matrix.
pub const NND_TOLERANCE: f64 = 1e-10;

/// A `p × p` Hermitian spectral density matrix at one frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMatrix(DMatrix<Complex64>);

impl SpectralMatrix {
    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::from_element(p, p, Complex64::new(0.0, 0.0)))
    }

    pub fn from_matrix(m: DMatrix<Complex64>) -> Self {
        assert!(m.is_square(), "spectral matrix must be square");
        Self(m)
    }

    /// Real symmetric matrix from its upper triangle; the lower triangle is
    /// mirrored so the result is exactly symmetric despite rounding.
    pub fn from_real(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "spectral matrix must be square");
        Self(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            Complex64::new(m[(i.min(j), i.max(j))], 0.0)
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.0[(i, j)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Largest `|f_ij - conj(f_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let p = self.dim();
        let mut worst = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.0 + self.0.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Hermitian with smallest eigenvalue `>= -1e-10 · trace`.
    pub fn is_nonnegative_definite(&self) -> bool {
        let scale = self.trace().abs().max(f64::MIN_POSITIVE);
        self.hermitian_defect() <= NND_TOLERANCE * scale
            && self.min_eigenvalue() >= -NND_TOLERANCE * scale
    }

    pub fn pair(&self, i: usize, j: usize) -> PairSpectrum {
        PairSpectrum {
            f11: self.0[(i, i)].re,
            f22: self.0[(j, j)].re,
            f12: self.0[(i, j)],
        }
    }
}

/// Spectra of one variable pair at one frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpectrum {
    pub f11: f64,
    pub f22: f64,
    pub f12: Complex64,
}

impl PairSpectrum {
    pub fn new(f11: f64, f22: f64, f12: Complex64) -> Self {
        Self { f11, f22, f12 }
    }

    /// The same pair with the roles of the two variables exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            f11: self.f22,
            f22: self.f11,
            f12: self.f12.conj(),
        }
    }

    /// Signed complex coherency `f12 / sqrt(f11 f22)`, zero where either
    /// marginal spectrum vanishes.
    pub fn coherency(&self) -> Complex64 {
        if self.f11 <= 0.0 || self.f22 <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.f12 / (self.f11 * self.f22).sqrt()
    }

    pub fn coherence2(&self) -> f64 {
        if self.f11 <= 0.0 || self.f22 <= 0.0 {
            return 0.0;
        }
        self.f12.norm_sqr() / (self.f11 * self.f22)
    }

    pub fn abs_coherence(&self) -> f64 {
        self.coherence2().sqrt()
    }

    /// Spectrum of the optimal linear predictor of variable 1 from variable 2,
    /// `|f12|² / f22`.
    pub fn conditional_spectrum(&self) -> Result<f64, ModelError> {
        if self.f22 <= 0.0 {
            return Err(ModelError::UndefinedTransfer);
        }
        Ok(self.f12.norm_sqr() / self.f22)
    }

    /// `|f12|² <= f11 f22` up to a relative tolerance.
    pub fn is_admissible(&self, tol: f64) -> bool {
        self.f11 >= 0.0
            && self.f22 >= 0.0
            && self.f12.norm_sqr() <= self.f11 * self.f22 * (1.0 + tol) + tol * f64::MIN_POSITIVE
    }
}

/// Gain `|f12/f11|` and phase `arg(f12/f11)` in `(-π, π]`.
pub fn pair_phase_gain(ps: &PairSpectrum) -> Result<(f64, f64), ModelError> {
    if ps.f11 <= 0.0 {
        return Err(ModelError::UndefinedGain);
    }
    let a = ps.f12 / ps.f11;
    Ok((a.norm(), wrap_phase(a.arg())))
}

/// Map an angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Frequency response `f12 / f22` of the mean-square optimal kernel that
/// predicts variable 1 from variable 2.
pub fn optimal_transfer(ps: &PairSpectrum) -> Result<Complex64, ModelError> {
    if ps.f22 <= 0.0 {
        return Err(ModelError::UndefinedTransfer);
    }
    Ok(ps.f12 / ps.f22)
}

/// A multivariate stationary model with a spectral density matrix.
pub trait SpectralModel {
    fn nvars(&self) -> usize;
    fn dim(&self) -> usize;
    fn spectral_matrix(&self, omega: &[f64]) -> SpectralMatrix;
    /// Characteristic frequency range `(low, high)` used to place validity scans.
    fn frequency_scale(&self) -> (f64, f64);
}

/// A model whose matrix covariance can be evaluated at any lag.
pub trait CovarianceModel: SpectralModel {
    /// `C(h)` with `C_ij(h) = Cov(Z_i(s + h), Z_j(s))`.
    fn covariance(&self, h: &[f64]) -> DMatrix<f64>;
}

/// Outcome of a model validity check.
#[derive(Clone, Debug, PartialEq)]
pub enum Validity {
    Valid,
    Invalid(Violation),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// A parameter is outside its admissible range.
    Constraint(String),
    /// The spectral matrix fails to be nonnegative definite at `‖ω‖ = omega_norm`.
    /// For a pair the value is the squared coherence, otherwise the smallest
    /// eigenvalue relative to the trace.
    Frequency {
        omega_norm: f64,
        pair: Option<(usize, usize)>,
        value: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Constraint(msg) => write!(f, "constraint violated: {msg}"),
            Violation::Frequency {
                omega_norm,
                pair: Some((i, j)),
                value,
            } => write!(
                f,
                "squared coherence of pair ({i},{j}) is {value:.6} > 1 at |omega| = {omega_norm:.6e}"
            ),
            Violation::Frequency {
                omega_norm, value, ..
            } => write!(
                f,
                "spectral matrix has relative eigenvalue {value:.3e} at |omega| = {omega_norm:.6e}"
            ),
        }
    }
}

/// Scan radii `log`-spaced over `[lo, hi]` along a few directions and report
/// the first frequency whose spectral matrix is not nonnegative definite.
pub fn eigen_scan<M: SpectralModel + ?Sized>(model: &M, budget: &ValidityBudget) -> Validity {
    let d = model.dim();
    let (lo, hi) = model.frequency_scale();
    let radii = budget.radii(lo, hi);
    let mut directions = vec![unit_axis(d)];
    if d > 1 {
        directions.push(vec![1.0 / (d as f64).sqrt(); d]);
    }
    let check = |omega: Vec<f64>| -> Option<Violation> {
        let m = model.spectral_matrix(&omega);
        if m.is_nonnegative_definite() {
            return None;
        }
        let scale = m.trace().abs().max(f64::MIN_POSITIVE);
        Some(Violation::Frequency {
            omega_norm: omega.iter().map(|w| w * w).sum::<f64>().sqrt(),
            pair: None,
            value: m.min_eigenvalue() / scale,
        })
    };
    if let Some(v) = check(vec![0.0; d]) {
        return Validity::Invalid(v);
    }
    for dir in &directions {
        for &r in &radii {
            if let Some(v) = check(dir.iter().map(|c| c * r).collect()) {
                return Validity::Invalid(v);
            }
        }
    }
    Validity::Valid
}

fn unit_axis(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}

/// A model described in JSON, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    MaternMv(MultiMaternModel),
    Lmc(LmcModel),
    Separable(SeparableModel),
    Convolution(ConvolutionModel),
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        spec.check_parameters()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            ModelError::InvalidParameter(format!("{}: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Static parameter checks (positivity, shapes).
    pub fn check_parameters(&self) -> Result<(), ModelError> {
        match self {
            ModelSpec::MaternMv(m) => m.check_parameters(),
            ModelSpec::Lmc(m) => m.check_parameters(),
            ModelSpec::Separable(m) => m.check_parameters(),
            ModelSpec::Convolution(m) => m.check_parameters(),
        }
    }

    /// Spectral validity: pairwise closed-form checks plus a full-matrix
    /// eigenvalue scan for the multivariate Matérn, an eigenvalue scan otherwise.
    pub fn validity(&self, budget: &ValidityBudget) -> Validity {
        if let Err(e) = self.check_parameters() {
            return Validity::Invalid(Violation::Constraint(e.to_string()));
        }
        match self {
            ModelSpec::MaternMv(m) => mm_validity_check(m, budget),
            other => eigen_scan(other, budget),
        }
    }

    pub fn as_covariance(&self) -> Option<&dyn CovarianceModel> {
        match self {
            ModelSpec::MaternMv(m) => Some(m),
            ModelSpec::Lmc(m) => Some(m),
            ModelSpec::Separable(m) => Some(m),
            ModelSpec::Convolution(_) => None,
        }
    }
}

impl SpectralModel for ModelSpec {
    fn nvars(&self) -> usize {
        match self {
            ModelSpec::MaternMv(m) => m.nvars(),
            ModelSpec::Lmc(m) => m.nvars(),
            ModelSpec::Separable(m) => m.nvars(),
            ModelSpec::Convolution(m) => m.nvars(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            ModelSpec::MaternMv(m) => SpectralModel::dim(m),
            ModelSpec::Lmc(m) => m.dim(),
            ModelSpec::Separable(m) => m.dim(),
            ModelSpec::Convolution(m) => m.dim(),
        }
    }

    fn spectral_matrix(&self, omega: &[f64]) -> SpectralMatrix {
        match self {
            ModelSpec::MaternMv(m) => m.spectral_matrix(omega),
            ModelSpec::Lmc(m) => m.spectral_matrix(omega),
            ModelSpec::Separable(m) => m.spectral_matrix(omega),
            ModelSpec::Convolution(m) => m.spectral_matrix(omega),
        }
    }

    fn frequency_scale(&self) -> (f64, f64) {
        match self {
            ModelSpec::MaternMv(m) => m.frequency_scale(),
            ModelSpec::Lmc(m) => m.frequency_scale(),
            ModelSpec::Separable(m) => m.frequency_scale(),
            ModelSpec::Convolution(m) => m.frequency_scale(),
        }
    }
}

pub(crate) fn square_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, ModelError> {
    let p = rows.len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(ModelError::InvalidParameter(format!(
            "{what} must be a non-empty square matrix"
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "{what} has non-finite entries"
        )));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}
