//! Matérn covariances and the multivariate Matérn model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use super::{CovarianceModel, SpectralMatrix, SpectralModel, Validity, Violation};
use crate::error::ModelError;
use crate::special::{ln_bessel_k, ln_gamma};

/// Above this value of `a‖h‖` the Matérn correlation is reported as zero.
pub const MATERN_UNDERFLOW_ARG: f64 = 700.0;

/// Slack allowed on `γ² <= 1` before a model is declared invalid.
const COHERENCE_SLACK: f64 = 1e-10;

/// Marginal Matérn parameters: variance, smoothness and inverse range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma2: f64,
    pub nu: f64,
    pub a: f64,
}

impl MaternParams {
    pub fn new(sigma2: f64, nu: f64, a: f64) -> Result<Self, ModelError> {
        let p = Self { sigma2, nu, a };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        for (name, v) in [("sigma2", self.sigma2), ("nu", self.nu), ("a", self.a)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Matérn correlation `M(h | ν, a) = 2^{1-ν}/Γ(ν) (a r)^ν K_ν(a r)` at distance `r`.
pub fn matern_correlation(r: f64, nu: f64, a: f64) -> f64 {
    let x = a * r.abs();
    if x == 0.0 {
        return 1.0;
    }
    if x > MATERN_UNDERFLOW_ARG {
        return 0.0;
    }
    ((1.0 - nu) * LN_2 - ln_gamma(nu) + nu * x.ln() + ln_bessel_k(nu, x)).exp()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Matérn covariance `σ² M(h | ν, a)`.
pub fn matern_cov(h: &[f64], p: &MaternParams) -> f64 {
    p.sigma2 * matern_correlation(norm(h), p.nu, p.a)
}

/// `ln(a² + r²)` without overflow or loss of precision at extreme ratios.
fn ln_sq_plus(a: f64, r: f64) -> f64 {
    let (big, small) = if a >= r { (a, r) } else { (r, a) };
    if big == 0.0 {
        return f64::NEG_INFINITY;
    }
    2.0 * big.ln() + (small / big).powi(2).ln_1p()
}

/// Log of the unit-variance Matérn spectral density at radius `r` in `d` dimensions.
pub(crate) fn ln_unit_sdf(r: f64, nu: f64, a: f64, d: usize) -> f64 {
    let half_d = d as f64 / 2.0;
    ln_gamma(nu + half_d) + 2.0 * nu * a.ln()
        - ln_gamma(nu)
        - half_d * PI.ln()
        - (nu + half_d) * ln_sq_plus(a, r)
}

/// Matérn spectral density
/// `σ² Γ(ν+d/2) a^{2ν} / (Γ(ν) π^{d/2} (a² + ‖ω‖²)^{ν+d/2})`.
pub fn matern_sdf(omega: &[f64], p: &MaternParams, d: usize) -> f64 {
    p.sigma2 * ln_unit_sdf(norm(omega), p.nu, p.a, d).exp()
}

/// Cross-covariance parameters of one variable pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossParams {
    pub rho: f64,
    pub nu: f64,
    pub a: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossEntry {
    pub i: usize,
    pub j: usize,
    pub rho: f64,
    pub nu: f64,
    pub a: f64,
}

/// Multivariate Matérn: `C_ii = σ_i² M(h|ν_i,a_i)`, `C_ij = ρ_ij σ_i σ_j M(h|ν_ij,a_ij)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiMaternModel {
    pub dim: usize,
    pub marginals: Vec<MaternParams>,
    pub cross: Vec<CrossEntry>,
    #[serde(skip)]
    validated: bool,
}

impl MultiMaternModel {
    pub fn new(
        dim: usize,
        marginals: Vec<MaternParams>,
        cross: Vec<CrossEntry>,
    ) -> Result<Self, ModelError> {
        let m = Self {
            dim,
            marginals,
            cross,
            validated: false,
        };
        m.check_parameters()?;
        Ok(m)
    }

    /// Bivariate model from marginals and one set of cross parameters.
    pub fn bivariate(
        dim: usize,
        m1: MaternParams,
        m2: MaternParams,
        cross: CrossParams,
    ) -> Result<Self, ModelError> {
        Self::new(
            dim,
            vec![m1, m2],
            vec![CrossEntry {
                i: 0,
                j: 1,
                rho: cross.rho,
                nu: cross.nu,
                a: cross.a,
            }],
        )
    }

    /// Common range `a` and `ν_12 = (ν_1 + ν_2)/2`. The coherence is constant;
    /// it equals `ρ` exactly only when `ν_1 = ν_2`.
    pub fn parsimonious(
        dim: usize,
        sigma2: [f64; 2],
        nu: [f64; 2],
        a: f64,
        rho: f64,
    ) -> Result<Self, ModelError> {
        Self::bivariate(
            dim,
            MaternParams::new(sigma2[0], nu[0], a)?,
            MaternParams::new(sigma2[1], nu[1], a)?,
            CrossParams {
                rho,
                nu: 0.5 * (nu[0] + nu[1]),
                a,
            },
        )
    }

    pub fn nvars(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Run [`mm_validity_check`] and mark the model validated on success.
    pub fn validate(mut self, budget: &ValidityBudget) -> Result<Self, (Self, Violation)> {
        match mm_validity_check(&self, budget) {
            Validity::Valid => {
                self.validated = true;
                Ok(self)
            }
            Validity::Invalid(v) => Err((self, v)),
        }
    }

    pub fn check_parameters(&self) -> Result<(), ModelError> {
        let p = self.nvars();
        if self.dim == 0 {
            return Err(ModelError::InvalidParameter(
                "dim must be at least 1".into(),
            ));
        }
        if p == 0 {
            return Err(ModelError::InvalidParameter("no marginals".into()));
        }
        for m in &self.marginals {
            m.check()?;
        }
        let mut seen = vec![false; p * p];
        for c in &self.cross {
            let (i, j) = (c.i.min(c.j), c.i.max(c.j));
            if i == j || j >= p {
                return Err(ModelError::InvalidParameter(format!(
                    "cross entry ({}, {}) is not a pair of distinct variables",
                    c.i, c.j
                )));
            }
            if std::mem::replace(&mut seen[i * p + j], true) {
                return Err(ModelError::InvalidParameter(format!(
                    "pair ({i}, {j}) given twice"
                )));
            }
            if !(c.rho.abs() <= 1.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "rho for pair ({i}, {j}) must lie in [-1, 1], got {}",
                    c.rho
                )));
            }
            MaternParams::new(1.0, c.nu, c.a)?;
        }
        for i in 0..p {
            for j in i + 1..p {
                if !seen[i * p + j] {
                    return Err(ModelError::InvalidParameter(format!(
                        "missing cross parameters for pair ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parameters of entry `(i, j)`; the diagonal reports `ρ = 1`.
    pub fn cross(&self, i: usize, j: usize) -> CrossParams {
        if i == j {
            let m = self.marginals[i];
            return CrossParams {
                rho: 1.0,
                nu: m.nu,
                a: m.a,
            };
        }
        let c = self
            .cross
            .iter()
            .find(|c| (c.i == i && c.j == j) || (c.i == j && c.j == i))
            .expect("cross parameters present for every pair");
        CrossParams {
            rho: c.rho,
            nu: c.nu,
            a: c.a,
        }
    }

    fn entry_scale(&self, i: usize, j: usize) -> f64 {
        self.cross(i, j).rho * (self.marginals[i].sigma2 * self.marginals[j].sigma2).sqrt()
    }
}

impl SpectralModel for MultiMaternModel {
    fn nvars(&self) -> usize {
        self.marginals.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn spectral_matrix(&self, omega: &[f64]) -> SpectralMatrix {
        mm_spectral_matrix(omega, self)
    }

    fn frequency_scale(&self) -> (f64, f64) {
        let ranges = self
            .marginals
            .iter()
            .map(|m| m.a)
            .chain(self.cross.iter().map(|c| c.a));
        ranges.fold((f64::INFINITY, 0.0f64), |(lo, hi), a| {
            (lo.min(a), hi.max(a))
        })
    }
}

impl CovarianceModel for MultiMaternModel {
    fn covariance(&self, h: &[f64]) -> DMatrix<f64> {
        let p = self.nvars();
        let r = norm(h);
        DMatrix::from_fn(p, p, |i, j| {
            let c = self.cross(i, j);
            self.entry_scale(i, j) * matern_correlation(r, c.nu, c.a)
        })
    }
}

/// Spectral matrix with entry `(i, j) = ρ_ij σ_i σ_j f(ω | ν_ij, a_ij)`.
pub fn mm_spectral_matrix(omega: &[f64], model: &MultiMaternModel) -> SpectralMatrix {
    let p = model.nvars();
    let r = norm(omega);
    let m = DMatrix::from_fn(p, p, |i, j| {
        let c = model.cross(i, j);
        if c.rho == 0.0 {
            0.0
        } else {
            model.entry_scale(i, j) * ln_unit_sdf(r, c.nu, c.a, model.dim).exp()
        }
    });
    SpectralMatrix::from_real(&m)
}

/// `ln γ²` of pair `(i, j)` at radius `r` from the closed form; `-∞` when `ρ = 0`.
fn ln_coherence2(r: f64, model: &MultiMaternModel, i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    let c = model.cross(i, j);
    if c.rho == 0.0 {
        return f64::NEG_INFINITY;
    }
    let (m1, m2) = (model.marginals[i], model.marginals[j]);
    let half_d = model.dim as f64 / 2.0;
    2.0 * c.rho.abs().ln() + 2.0 * ln_gamma(c.nu + half_d) + ln_gamma(m1.nu) + ln_gamma(m2.nu)
        - ln_gamma(m1.nu + half_d)
        - ln_gamma(m2.nu + half_d)
        - 2.0 * ln_gamma(c.nu)
        + 4.0 * c.nu * c.a.ln()
        - 2.0 * m1.nu * m1.a.ln()
        - 2.0 * m2.nu * m2.a.ln()
        + (m1.nu + half_d) * ln_sq_plus(m1.a, r)
        + (m2.nu + half_d) * ln_sq_plus(m2.a, r)
        - (2.0 * c.nu + 2.0 * half_d) * ln_sq_plus(c.a, r)
}

/// Squared coherence `γ_ij(ω)²` of the multivariate Matérn (closed form).
///
/// Not clamped: models that fail [`mm_validity_check`] can exceed one.
pub fn mm_coherence(omega: &[f64], model: &MultiMaternModel, i: usize, j: usize) -> f64 {
    mm_coherence_at(norm(omega), model, i, j)
}

/// [`mm_coherence`] at radius `‖ω‖ = r`.
pub fn mm_coherence_at(r: f64, model: &MultiMaternModel, i: usize, j: usize) -> f64 {
    ln_coherence2(r, model, i, j).exp()
}

/// Squared coherence when all ranges equal `a`.
pub fn coherence_common_range(r: f64, rho: f64, nu: [f64; 2], nu12: f64, a: f64, d: usize) -> f64 {
    let h = d as f64 / 2.0;
    let gammas = (2.0 * ln_gamma(nu12 + h) + ln_gamma(nu[0]) + ln_gamma(nu[1])
        - ln_gamma(nu[0] + h)
        - ln_gamma(nu[1] + h)
        - 2.0 * ln_gamma(nu12))
    .exp();
    rho * rho * gammas * (a * a + r * r).powf(nu[0] + nu[1] - 2.0 * nu12)
}

/// Squared coherence when all smoothnesses equal `ν`.
pub fn coherence_common_smoothness(
    r: f64,
    rho: f64,
    nu: f64,
    a: [f64; 2],
    a12: f64,
    d: usize,
) -> f64 {
    let r2 = r * r;
    let ratio = (a[0] * a[0] + r2) * (a[1] * a[1] + r2) / (a12 * a12 + r2).powi(2);
    rho * rho * (a12 * a12 / (a[0] * a[1])).powf(2.0 * nu) * ratio.powf(nu + d as f64 / 2.0)
}

/// Radii scanned by the validity check.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidityBudget {
    pub count: usize,
    pub low_factor: f64,
    pub high_factor: f64,
}

impl Default for ValidityBudget {
    fn default() -> Self {
        Self {
            count: 512,
            low_factor: 1e-4,
            high_factor: 1e4,
        }
    }
}

impl ValidityBudget {
    /// `count` log-spaced radii in `[low_factor · lo, high_factor · hi]`.
    pub fn radii(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b) = ((self.low_factor * lo).ln(), (self.high_factor * hi).ln());
        let n = self.count.max(2);
        (0..n)
            .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// Check `γ_ij² <= 1` for every pair over the radial budget and the analytic
/// limits at zero and infinity, then scan full-matrix eigenvalues when `p > 2`.
pub fn mm_validity_check(model: &MultiMaternModel, budget: &ValidityBudget) -> Validity {
    if let Err(e) = model.check_parameters() {
        return Validity::Invalid(Violation::Constraint(e.to_string()));
    }
    let p = model.nvars();
    let (lo, hi) = model.frequency_scale();
    let radii = budget.radii(lo, hi);
    let limit = (1.0 + COHERENCE_SLACK).ln();
    for i in 0..p {
        for j in i + 1..p {
            let c = model.cross(i, j);
            if c.rho == 0.0 {
                continue;
            }
            let witness = |r: f64| {
                let v = ln_coherence2(r, model, i, j);
                (v > limit).then(|| {
                    Validity::Invalid(Violation::Frequency {
                        omega_norm: r,
                        pair: Some((i, j)),
                        value: v.exp(),
                    })
                })
            };
            for &r in std::iter::once(&0.0).chain(&radii) {
                if let Some(bad) = witness(r) {
                    return bad;
                }
            }
            // Behaviour as ‖ω‖ → ∞: γ² ~ C ‖ω‖^{2(ν_i + ν_j - 2ν_ij)}.
            let (m1, m2) = (model.marginals[i], model.marginals[j]);
            let exponent = m1.nu + m2.nu - 2.0 * c.nu;
            if exponent >= 0.0 {
                let mut r = *radii.last().unwrap_or(&1.0);
                while r < 1e300 {
                    if let Some(bad) = witness(r) {
                        return bad;
                    }
                    r *= 2.0;
                }
            }
        }
    }
    if p > 2 {
        let mut e = vec![0.0; model.dim];
        for &r in std::iter::once(&0.0).chain(&radii) {
            e[0] = r;
            let m = mm_spectral_matrix(&e, model);
            if !m.is_nonnegative_definite() {
                let scale = m.trace().abs().max(f64::MIN_POSITIVE);
                return Validity::Invalid(Violation::Frequency {
                    omega_norm: r,
                    pair: None,
                    value: m.min_eigenvalue() / scale,
                });
            }
        }
    }
    Validity::Valid
}
