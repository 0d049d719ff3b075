//! Convolution constructions: every variable is a linear filter of one common
//! base process, so `f_ij(ω) = f_base(ω) g_i(ω) g_j(ω)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{matern_sdf, MaternParams, PairSpectrum, SpectralMatrix, SpectralModel};
use crate::error::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BaseProcess {
    /// White noise of the given intensity: `C(h) = variance · δ(h)`.
    White {
        variance: f64,
    },
    Matern(MaternParams),
}

impl BaseProcess {
    pub fn sdf(&self, omega: &[f64]) -> f64 {
        match self {
            BaseProcess::White { variance } => variance / (2.0 * PI).powi(omega.len() as i32),
            BaseProcess::Matern(p) => matern_sdf(omega, p, omega.len()),
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        match self {
            BaseProcess::White { variance } if !(*variance > 0.0 && variance.is_finite()) => {
                Err(ModelError::InvalidParameter(format!(
                    "white-noise variance must be positive, got {variance}"
                )))
            }
            BaseProcess::White { .. } => Ok(()),
            BaseProcess::Matern(p) => p.check(),
        }
    }
}

/// A symmetric convolution kernel, described by its Fourier transform
/// `g(ω) = ∫ k(s) e^{-i sᵀω} ds`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Identity,
    /// `k(s) = weight · N(s; 0, scale² I)`, so `g(ω) = weight · exp(-scale² ‖ω‖² / 2)`.
    Gaussian {
        scale: f64,
        weight: f64,
    },
    /// `k(s) = weight / (2h)^d` on `[-h, h]^d`, so `g(ω) = weight · Π sinc(h ω_i)`.
    Box {
        half_width: f64,
        weight: f64,
    },
}

impl Kernel {
    pub fn transfer(&self, omega: &[f64]) -> f64 {
        match *self {
            Kernel::Identity => 1.0,
            Kernel::Gaussian { scale, weight } => {
                let n2: f64 = omega.iter().map(|w| w * w).sum();
                weight * (-0.5 * scale * scale * n2).exp()
            }
            Kernel::Box { half_width, weight } => {
                weight
                    * omega
                        .iter()
                        .map(|&w| {
                            let x = half_width * w;
                            if x == 0.0 {
                                1.0
                            } else {
                                x.sin() / x
                            }
                        })
                        .product::<f64>()
            }
        }
    }

    /// Half-width of the spatial support, effectively for the Gaussian.
    pub fn reach(&self) -> f64 {
        match *self {
            Kernel::Identity => 0.0,
            Kernel::Gaussian { scale, .. } => 6.0 * scale,
            Kernel::Box { half_width, .. } => half_width,
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            Kernel::Identity => Ok(()),
            Kernel::Gaussian { scale, weight }
            | Kernel::Box {
                half_width: scale,
                weight,
            } if !ok(scale) || !weight.is_finite() => Err(ModelError::InvalidParameter(format!(
                "kernel width must be positive and weight finite: {self:?}"
            ))),
            _ => Ok(()),
        }
    }
}

/// `Z_i = k_i * W` for a common base process `W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionModel {
    pub dim: usize,
    pub base: BaseProcess,
    pub kernels: Vec<Kernel>,
}

impl ConvolutionModel {
    pub fn new(dim: usize, base: BaseProcess, kernels: Vec<Kernel>) -> Result<Self, ModelError> {
        let m = Self { dim, base, kernels };
        m.check_parameters()?;
        Ok(m)
    }

    /// Covariance convolution: white base, `Z_i = c_i * W`.
    pub fn covariance_convolution(dim: usize, kernels: Vec<Kernel>) -> Result<Self, ModelError> {
        Self::new(dim, BaseProcess::White { variance: 1.0 }, kernels)
    }

    /// Kernel-smoothed process: `Z_1 = W`, `Z_2 = K * W`.
    pub fn smoothed_pair(
        dim: usize,
        base: MaternParams,
        kernel: Kernel,
    ) -> Result<Self, ModelError> {
        Self::new(
            dim,
            BaseProcess::Matern(base),
            vec![Kernel::Identity, kernel],
        )
    }

    pub fn nvars(&self) -> usize {
        self.kernels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn check_parameters(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::InvalidParameter(
                "dim must be at least 1".into(),
            ));
        }
        if self.kernels.is_empty() {
            return Err(ModelError::InvalidParameter("no kernels".into()));
        }
        self.base.check()?;
        self.kernels.iter().try_for_each(Kernel::check)
    }

    /// Transfer functions of every variable at `ω`.
    pub fn transfers(&self, omega: &[f64]) -> Vec<f64> {
        self.kernels.iter().map(|k| k.transfer(omega)).collect()
    }

    /// Largest kernel reach, the padding a spatial simulation needs.
    pub fn reach(&self) -> f64 {
        self.kernels.iter().map(Kernel::reach).fold(0.0, f64::max)
    }
}

impl SpectralModel for ConvolutionModel {
    fn nvars(&self) -> usize {
        self.kernels.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn spectral_matrix(&self, omega: &[f64]) -> SpectralMatrix {
        let f = self.base.sdf(omega);
        let g = self.transfers(omega);
        let p = g.len();
        let mut m = SpectralMatrix::zeros(p);
        for i in 0..p {
            for j in i..p {
                let v = Complex64::new(f * g[i] * g[j], 0.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    fn frequency_scale(&self) -> (f64, f64) {
        let mut scales: Vec<f64> = self
            .kernels
            .iter()
            .filter_map(|k| match *k {
                Kernel::Identity => None,
                Kernel::Gaussian { scale, .. } => Some(1.0 / scale),
                Kernel::Box { half_width, .. } => Some(1.0 / half_width),
            })
            .collect();
        if let BaseProcess::Matern(p) = self.base {
            scales.push(p.a);
        }
        if scales.is_empty() {
            return (1.0, 1.0);
        }
        scales.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        })
    }
}

/// Spectra of `(Z_1, Z_2)` with `Z_2 = K * Z_1`: `(f_1, f_1 f_K², f_1 f_K)`.
pub fn convolution_pair_spectra(f_k: f64, f1: f64) -> PairSpectrum {
    PairSpectrum::new(f1, f1 * f_k * f_k, Complex64::new(f1 * f_k, 0.0))
}
