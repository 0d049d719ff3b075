//! Least-squares spectral fitting of Matérn parameters.
//!
//! Marginal fits match `log σ² f(ω | ν, a)` to the log of an averaged
//! periodogram; cross fits match the multivariate-Matérn squared coherence to
//! an estimated squared coherence with the marginals held fixed. Both are
//! radial, run Nelder–Mead on `log`/`atanh`-transformed parameters from a
//! small grid of starts, and restart from the best point until it holds.
//!
//! With the default band (`0 < r ≤ 0.9 r_max`) the untapered periodogram's
//! leakage biases `ν̂` low. The Monte Carlo calibration therefore uses 64×64
//! fields at spacing 0.25, 100 replicates, 3×3 box smoothing and the band
//! `0 < r ≤ 0.3 r_max`. For ν = 1, a = 1 marginals and ρ = 0.5, ν₁₂ = 1,
//! a₁₂ = √2 the estimates land in ν̂ ∈ [0.8, 1.2], â ∈ [0.7, 1.4],
//! ρ̂ ∈ [0.35, 0.65] and â₁₂ ∈ [1.1, 1.8].

mod nelder_mead;

pub use nelder_mead::{Minimum, NelderMead};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::FitError;
use crate::estimate::{CoherenceSummary, PeriodogramField};
use crate::models::ln_unit_sdf;
use crate::models::{
    mm_coherence_at, mm_validity_check, CrossParams, MaternParams, MultiMaternModel, ValidityBudget,
};

/// Fraction of the largest radius kept by the default band.
pub const DEFAULT_BAND_FRACTION: f64 = 0.9;

/// Relative Hessian eigenvalue below which a direction is reported as flat.
const FLAT_RATIO: f64 = 1e-8;

/// Values of a radial function sampled at frequency radii.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialTarget {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// `gain · cos(phase)` per radius; its sign at the lowest nonzero radius
    /// fixes the sign of a fitted correlation.
    pub in_phase: Option<Vec<f64>>,
}

impl RadialTarget {
    /// Diagonal entry `var` of a (typically averaged and smoothed) periodogram.
    pub fn from_periodogram(pg: &PeriodogramField, var: usize) -> Result<Self, FitError> {
        if var >= pg.nvars() {
            return Err(FitError::InvalidInput(format!(
                "variable {var} out of range"
            )));
        }
        Ok(Self {
            dim: pg.freqs().dims(),
            radii: (0..pg.len()).map(|k| pg.freqs().norm(k)).collect(),
            values: pg.diagonal(var),
            in_phase: None,
        })
    }

    pub fn from_coherence(c: &CoherenceSummary) -> Self {
        Self {
            dim: c.freqs.dims(),
            radii: (0..c.len()).map(|k| c.freqs.norm(k)).collect(),
            values: c.coh2.clone(),
            in_phase: Some(
                c.gain
                    .iter()
                    .zip(&c.phase)
                    .map(|(g, p)| g * p.cos())
                    .collect(),
            ),
        }
    }

    fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    /// Radial band `[rmin, rmax]`; `None` keeps `0 < r <= 0.9 · r_max`.
    /// The zero frequency is always excluded.
    pub band: Option<(f64, f64)>,
    pub optimizer: NelderMead,
    /// Fresh-simplex restarts from the best point after the first descent.
    pub restarts: usize,
    /// Solve for `σ²` in closed form instead of searching over it.
    pub profile_sigma2: bool,
    /// Starting points in natural parameters, overriding the default grid:
    /// `(ν, a)` or `(σ², ν, a)` for marginal fits, `(ρ, ν₁₂, a₁₂)` for cross fits.
    pub starts: Option<Vec<Vec<f64>>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            band: None,
            optimizer: NelderMead::default(),
            restarts: 3,
            profile_sigma2: true,
            starts: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub estimates: BTreeMap<String, f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub band: (f64, f64),
    pub nfreq: usize,
    /// Parameters along which the objective is numerically flat at the optimum.
    pub flat_directions: Vec<String>,
    /// Best objective reached from each starting point.
    pub start_objectives: Vec<f64>,
    /// Fitted cross parameters fail the validity check.
    pub invalid_model: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.estimates.get(name).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

struct Band {
    lo: f64,
    hi: f64,
    idx: Vec<usize>,
}

fn select_band(target: &RadialTarget, cfg: &FitConfig) -> Result<Band, FitError> {
    let (lo, hi) = cfg
        .band
        .unwrap_or((0.0, DEFAULT_BAND_FRACTION * target.max_radius()));
    if !(lo <= hi) {
        return Err(FitError::InvalidInput(format!("empty band {lo}:{hi}")));
    }
    let idx: Vec<usize> = (0..target.radii.len())
        .filter(|&k| {
            let r = target.radii[k];
            r > 0.0 && r >= lo && r <= hi
        })
        .collect();
    if idx.is_empty() {
        return Err(FitError::EmptyBand);
    }
    Ok(Band { lo, hi, idx })
}

/// Multi-start Nelder–Mead with restarts; returns the best minimum, the
/// per-start objectives and the total iteration count.
fn search(
    f: &dyn Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    cfg: &FitConfig,
) -> (Minimum, Vec<f64>, usize) {
    let mut total = 0;
    let mut per_start = Vec::with_capacity(starts.len());
    let mut best: Option<Minimum> = None;
    for s in starts {
        let mut m = cfg.optimizer.minimize(f, s);
        total += m.iterations;
        for _ in 0..cfg.restarts {
            let again = cfg.optimizer.minimize(f, &m.x);
            total += again.iterations;
            let improved = again.f < m.f;
            if improved {
                m = again;
            } else {
                m.converged &= again.converged;
                break;
            }
        }
        per_start.push(m.f);
        if best.as_ref().is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
    }
    (best.expect("at least one start"), per_start, total)
}

/// Names of parameters spanning near-null Hessian directions at `x`.
fn flat_directions(f: &dyn Fn(&[f64]) -> f64, x: &[f64], names: &[&str]) -> Vec<String> {
    let n = x.len();
    let h = 1e-4;
    let at = |dx: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in dx {
            y[i] += d;
        }
        f(&y)
    };
    let f0 = f(x);
    let hess = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h)
        } else {
            (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h)
        }
    });
    let eig = hess.symmetric_eigen();
    let top = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut out = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if top > 0.0 && lambda.abs() > FLAT_RATIO * top {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        for (i, name) in names.iter().enumerate() {
            if v[i].abs() > 0.1 && !out.iter().any(|s: &String| s == name) {
                out.push(name.to_string());
            }
        }
    }
    out
}

/// Fit `(σ², ν, a)` by least squares between `log σ² f(r | ν, a)` and the
/// log of the target spectrum over the band.
pub fn fit_matern_marginal(target: &RadialTarget, cfg: &FitConfig) -> Result<FitResult, FitError> {
    let band = select_band(target, cfg)?;
    let mut radii = Vec::with_capacity(band.idx.len());
    let mut logs = Vec::with_capacity(band.idx.len());
    for &k in &band.idx {
        let v = target.values[k];
        if !(v > 0.0 && v.is_finite()) {
            return Err(FitError::NonPositivePeriodogram { index: k, value: v });
        }
        radii.push(target.radii[k]);
        logs.push(v.ln());
    }
    let d = target.dim;
    let n = radii.len() as f64;
    let residual_parts = |nu: f64, a: f64| -> Vec<f64> {
        radii
            .iter()
            .zip(&logs)
            .map(|(&r, &y)| ln_unit_sdf(r, nu, a, d) - y)
            .collect()
    };
    let profiled = |x: &[f64]| -> (f64, f64) {
        let parts = residual_parts(x[0].exp(), x[1].exp());
        let ln_s2 = -parts.iter().sum::<f64>() / n;
        (ln_s2, parts.iter().map(|e| (e + ln_s2).powi(2)).sum())
    };
    let objective: Box<dyn Fn(&[f64]) -> f64> = if cfg.profile_sigma2 {
        Box::new(move |x: &[f64]| profiled(x).1)
    } else {
        Box::new(move |x: &[f64]| {
            residual_parts(x[1].exp(), x[2].exp())
                .iter()
                .map(|e| (e + x[0]).powi(2))
                .sum()
        })
    };
    let r_mid = (radii.iter().copied().fold(f64::INFINITY, f64::min)
        * band.hi.min(radii.iter().copied().fold(0.0, f64::max)))
    .sqrt();
    let natural_starts: Vec<Vec<f64>> = match &cfg.starts {
        Some(s) => s.clone(),
        None => {
            let mut s = Vec::new();
            for nu in [0.5, 1.5] {
                for a in [0.25 * r_mid, r_mid, 4.0 * r_mid] {
                    s.push(vec![nu, a]);
                }
            }
            s
        }
    };
    let starts: Vec<Vec<f64>> = natural_starts
        .iter()
        .map(|s| {
            let (nu, a) = (s[s.len() - 2], s[s.len() - 1]);
            let base = vec![nu.ln(), a.ln()];
            if cfg.profile_sigma2 {
                base
            } else {
                let s2 = if s.len() == 3 {
                    s[0]
                } else {
                    (logs.iter().sum::<f64>() / n - ln_unit_sdf(r_mid, nu, a, d)).exp()
                };
                [vec![s2.ln()], base].concat()
            }
        })
        .collect();
    let (best, start_objectives, iterations) = search(objective.as_ref(), &starts, cfg);
    let (ln_s2, nu, a) = if cfg.profile_sigma2 {
        (profiled(&best.x).0, best.x[0].exp(), best.x[1].exp())
    } else {
        (best.x[0], best.x[1].exp(), best.x[2].exp())
    };
    let names: &[&str] = if cfg.profile_sigma2 {
        &["nu", "a"]
    } else {
        &["sigma2", "nu", "a"]
    };
    let flat = flat_directions(objective.as_ref(), &best.x, names);
    Ok(FitResult {
        estimates: BTreeMap::from([
            ("sigma2".to_string(), ln_s2.exp()),
            ("nu".to_string(), nu),
            ("a".to_string(), a),
        ]),
        objective: best.f,
        iterations,
        converged: best.converged,
        band: (band.lo, band.hi),
        nfreq: band.idx.len(),
        flat_directions: flat,
        start_objectives,
        invalid_model: false,
    })
}

/// Sign of the in-phase cross-spectrum averaged over the lowest nonzero radius.
fn correlation_sign(target: &RadialTarget) -> f64 {
    let Some(in_phase) = &target.in_phase else {
        return 1.0;
    };
    let r0 = target
        .radii
        .iter()
        .copied()
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    let total: f64 = target
        .radii
        .iter()
        .zip(in_phase)
        .filter(|(r, _)| **r > 0.0 && (**r - r0).abs() <= 1e-12 * r0)
        .map(|(_, v)| v)
        .sum();
    if total < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Fit `(ρ, ν₁₂, a₁₂)` by least squares between the multivariate-Matérn
/// squared coherence and the target over the band, marginals fixed.
///
/// Coherence only determines `|ρ|`; the sign follows the in-phase
/// cross-spectrum at the lowest nonzero radius.
pub fn fit_matern_cross(
    target: &RadialTarget,
    marginals: (MaternParams, MaternParams),
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    let band = select_band(target, cfg)?;
    let radii: Vec<f64> = band.idx.iter().map(|&k| target.radii[k]).collect();
    let values: Vec<f64> = band.idx.iter().map(|&k| target.values[k]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FitError::InvalidInput(
            "non-finite coherence in band".into(),
        ));
    }
    let (m1, m2) = marginals;
    let unit = |p: MaternParams| MaternParams { sigma2: 1.0, ..p };
    let (m1, m2) = (unit(m1), unit(m2));
    let d = target.dim;
    let model_at = |x: &[f64]| {
        MultiMaternModel::bivariate(
            d,
            m1,
            m2,
            CrossParams {
                rho: x[0].tanh(),
                nu: x[1].exp(),
                a: x[2].exp(),
            },
        )
    };
    let objective = |x: &[f64]| -> f64 {
        match model_at(x) {
            Ok(m) => radii
                .iter()
                .zip(&values)
                .map(|(&r, &y)| (mm_coherence_at(r, &m, 0, 1) - y).powi(2))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let natural_starts = match &cfg.starts {
        Some(s) => s.clone(),
        None => {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let rho0 = mean.max(1e-4).sqrt().min(0.95);
            let nu0 = 0.5 * (m1.nu + m2.nu);
            let a0 = 0.5 * (m1.a + m2.a);
            let mut s = Vec::new();
            for nu in [nu0, nu0 + 0.5] {
                for a in [0.5 * a0, a0, 2.0 * a0] {
                    s.push(vec![rho0, nu, a]);
                }
            }
            s
        }
    };
    let starts: Vec<Vec<f64>> = natural_starts
        .iter()
        .map(|s| vec![s[0].clamp(-0.999, 0.999).atanh(), s[1].ln(), s[2].ln()])
        .collect();
    let (best, start_objectives, iterations) = search(&objective, &starts, cfg);
    let rho = best.x[0].tanh().abs() * correlation_sign(target);
    let (nu12, a12) = (best.x[1].exp(), best.x[2].exp());
    let flat = flat_directions(&objective, &best.x, &["rho", "nu12", "a12"]);
    let fitted = MultiMaternModel::bivariate(
        d,
        m1,
        m2,
        CrossParams {
            rho,
            nu: nu12,
            a: a12,
        },
    )
    .map_err(|e| FitError::InvalidInput(e.to_string()))?;
    let invalid_model = !mm_validity_check(&fitted, &ValidityBudget::default()).is_valid();
    Ok(FitResult {
        estimates: BTreeMap::from([
            ("rho".to_string(), rho),
            ("nu12".to_string(), nu12),
            ("a12".to_string(), a12),
        ]),
        objective: best.f,
        iterations,
        converged: best.converged,
        band: (band.lo, band.hi),
        nfreq: band.idx.len(),
        flat_directions: flat,
        start_objectives,
        invalid_model,
    })
}
