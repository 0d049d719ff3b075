//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Run with `cargo test --test acceptance`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use speccoh::estimate::{
    mean_periodogram, periodogram, replicate_coherence, smooth, Averaging, Pairing, SmoothingKernel,
};
use speccoh::fit::{fit_matern_cross, fit_matern_marginal, FitConfig, FitResult, RadialTarget};
use speccoh::models::*;
use speccoh::simulate::{filtered_correlation, simulate, FilterStencil, Method, SimRequest};
use speccoh::{fourier_frequencies, GridSpec, MultiField};
use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn matern(sigma2: f64, nu: f64, a: f64) -> MaternParams {
    MaternParams::new(sigma2, nu, a).unwrap()
}

fn bivariate(m1: MaternParams, m2: MaternParams, rho: f64, nu: f64, a: f64) -> MultiMaternModel {
    MultiMaternModel::bivariate(2, m1, m2, CrossParams { rho, nu, a }).unwrap()
}

fn normal_field(rng: &mut ChaCha8Rng, grid: GridSpec, nvars: usize, complex: bool) -> MultiField {
    let n = grid.len() * nvars;
    let values = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if complex {
                rng.sample(StandardNormal)
            } else {
                0.0
            };
            Complex64::new(re, im)
        })
        .collect();
    MultiField::new(grid, nvars, 1, values).unwrap()
}

fn random_grid(rng: &mut ChaCha8Rng, dims: usize, max_n: usize) -> GridSpec {
    let sizes = (0..dims).map(|_| rng.random_range(1..=max_n)).collect();
    let spacings = (0..dims).map(|_| rng.random_range(0.1..2.0)).collect();
    GridSpec::new(sizes, spacings).unwrap()
}

fn parseval() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dims = rng.random_range(1..=2);
        let grid = random_grid(&mut rng, dims, 32);
        let p = rng.random_range(1..=3);
        let field = normal_field(&mut rng, grid.clone(), p, true);
        let pg = periodogram(&field, 0).unwrap();
        let dw = (2.0 * PI).powi(dims as i32) / (grid.cell_volume() * grid.len() as f64);
        for k in 0..p {
            let lhs: f64 = pg.diagonal(k).iter().sum::<f64>() * dw;
            let rhs =
                field.slice(0, k).iter().map(|z| z.norm_sqr()).sum::<f64>() / grid.len() as f64;
            worst = worst.max((lhs / rhs - 1.0).abs());
        }
    }
    outcome(
        worst <= 1e-10,
        format!("100 random fields, max relative error {worst:.2e} (tol 1e-10)"),
    )
}

fn brute_force_dft() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut grids: Vec<Vec<usize>> = (1..=8).map(|n| vec![n]).collect();
    for n1 in 1..=8 {
        for n2 in 1..=8 {
            grids.push(vec![n1, n2]);
        }
    }
    let mut worst = 0.0f64;
    let mut count = 0;
    for sizes in &grids {
        for p in 1..=3 {
            let spacings = sizes.iter().map(|_| rng.random_range(0.2..1.5)).collect();
            let grid = GridSpec::new(sizes.clone(), spacings).unwrap();
            let field = normal_field(&mut rng, grid.clone(), p, true);
            let pg = periodogram(&field, 0).unwrap();
            let freqs = fourier_frequencies(&grid);
            let scale =
                grid.cell_volume() / ((2.0 * PI).powi(grid.dims() as i32) * grid.len() as f64);
            let coords: Vec<Vec<f64>> = (0..grid.len()).map(|j| grid.coords(j)).collect();
            let mut max_entry = 0.0f64;
            let mut max_err = 0.0f64;
            for f in 0..freqs.len() {
                let w = freqs.omega(f);
                let sums: Vec<Complex64> = (0..p)
                    .map(|k| {
                        coords
                            .iter()
                            .zip(field.slice(0, k))
                            .map(|(s, z)| {
                                let phase: f64 = s.iter().zip(w).map(|(a, b)| a * b).sum();
                                z * Complex64::from_polar(1.0, -phase)
                            })
                            .sum()
                    })
                    .collect();
                for k in 0..p {
                    for l in 0..p {
                        let direct = sums[k] * sums[l].conj() * scale;
                        max_entry = max_entry.max(direct.norm());
                        max_err = max_err.max((direct - pg.entry(f, k, l)).norm());
                    }
                }
            }
            worst = worst.max(max_err / max_entry);
            count += 1;
        }
    }
    outcome(
        worst <= 1e-10,
        format!("{count} grid/p combinations up to 8x8, p<=3, max relative error {worst:.2e} (tol 1e-10)"),
    )
}

fn random_frequencies(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
        .collect()
}

fn constant_coherence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let freqs = random_frequencies(&mut rng, 100);
    let gauss = Kernel::Gaussian {
        scale: 0.5,
        weight: 1.0,
    };
    let boxk = Kernel::Box {
        half_width: 0.3,
        weight: -2.0,
    };
    let models: Vec<(&str, ModelSpec)> = vec![
        (
            "separable",
            ModelSpec::Separable(
                SeparableModel::new(2, vec![vec![2.0, 0.7], vec![0.7, 1.0]], 1.2, 0.8).unwrap(),
            ),
        ),
        (
            "covariance convolution",
            ModelSpec::Convolution(
                ConvolutionModel::covariance_convolution(2, vec![gauss, boxk]).unwrap(),
            ),
        ),
        (
            "kernel smoothed",
            ModelSpec::Convolution(
                ConvolutionModel::smoothed_pair(2, matern(1.0, 1.0, 1.0), gauss).unwrap(),
            ),
        ),
        (
            "common-base convolution",
            ModelSpec::Convolution(
                ConvolutionModel::new(
                    2,
                    BaseProcess::Matern(matern(1.5, 0.7, 2.0)),
                    vec![gauss, boxk],
                )
                .unwrap(),
            ),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model) in &models {
        let c: Vec<f64> = freqs
            .iter()
            .map(|w| model.spectral_matrix(w).pair(0, 1).abs_coherence())
            .collect();
        let spread = c.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - c.iter().copied().fold(f64::INFINITY, f64::min);
        pass &= spread <= 1e-10;
        parts.push(format!("{name} |γ|={:.6} spread {spread:.1e}", c[0]));
    }

    // Simulated kernel-smoothed pair Z₁ = W, Z₂ = K * W on a 64×64 window.
    // Near the window edges Z₂ depends on W outside it, which caps γ̂² well
    // below 1 once the kernel spans a cell or more (an independent FFT
    // reimplementation gives min γ̂² ≈ 0.96 / 0.90 / 0.81 for a Gaussian sd of
    // ½ / 1 / 2 cells). The check uses a half-cell kernel on a white base,
    // whose untapered periodogram is unbiased; a two-cell kernel on a steep
    // Matérn base is reported for reference.
    let grid = GridSpec::new(vec![64, 64], vec![0.25, 0.25]).unwrap();
    let lattice = fourier_frequencies(&grid);
    let min_coh2 = |base: BaseProcess, kernel: Kernel| {
        let model = ModelSpec::Convolution(
            ConvolutionModel::new(2, base, vec![Kernel::Identity, kernel]).unwrap(),
        );
        let field = simulate(&SimRequest {
            model: &model,
            grid: grid.clone(),
            reps: 50,
            seed: 3,
            method: Method::Circulant,
        })
        .unwrap();
        let coh = replicate_coherence(
            &field,
            &Pairing::same(50),
            0,
            1,
            &SmoothingKernel::box3(),
            Averaging::Coherence,
        )
        .unwrap();
        let support: Vec<usize> = (0..lattice.len())
            .filter(|&k| kernel.transfer(lattice.omega(k)) >= 0.2)
            .collect();
        (
            support
                .iter()
                .map(|&k| coh.coh2[k])
                .fold(f64::INFINITY, f64::min),
            support.len(),
        )
    };
    let (narrow, bins) = min_coh2(
        BaseProcess::White { variance: 1.0 },
        Kernel::Gaussian {
            scale: 0.125,
            weight: 1.0,
        },
    );
    let (wide, _) = min_coh2(BaseProcess::Matern(matern(1.0, 1.0, 1.0)), gauss);
    pass &= narrow > 0.9;
    parts.push(format!(
        "simulated smoothed pair (white base, kernel sd ½ cell): min γ̂² {narrow:.4} over {bins} bins with \
         |f_K| >= 0.2 max (need > 0.9); Matérn base with 2-cell kernel for reference: {wide:.4}"
    ));
    outcome(pass, parts.join("; "))
}

fn figure_endpoints() -> Outcome {
    let radii: Vec<f64> = (0..200)
        .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 199.0))
        .collect();
    let mut worst_const = 0.0f64;
    for nu in [0.5, 1.0, 2.5] {
        for rho in [-0.9, 0.2, 0.5, 1.0] {
            for r in &radii {
                let c = coherence_common_range(*r, rho, [nu, nu], nu, 1.3, 2).sqrt();
                worst_const = worst_const.max((c - rho.abs()).abs());
            }
        }
    }
    let mut worst_limit = 0.0f64;
    for rho in [0.5, 0.3] {
        let nu = 1.0;
        let limit = rho * 2f64.powf(nu);
        let c = coherence_common_smoothness(1e3, rho, nu, [1.0, 1.0], 2f64.sqrt(), 2).sqrt();
        worst_limit = worst_limit.max((c / limit - 1.0).abs());
    }
    outcome(
        worst_const <= 1e-12 && worst_limit <= 0.01,
        format!(
            "parsimonious |γ| - |ρ| max {worst_const:.1e}; common-smoothness |γ(10³)| vs ρ·2^ν rel error {worst_limit:.2e} (tol 1%)"
        ),
    )
}

/// Population correlation of the two variables after a 3×3 stencil.
fn filtered_population_correlation(
    model: &MultiMaternModel,
    spacing: f64,
    stencil: &FilterStencil,
) -> f64 {
    let w = stencil.0;
    let cov = |i: usize, j: usize| {
        let mut s = 0.0;
        for p in 0..9 {
            for q in 0..9 {
                let h = [
                    ((p / 3) as f64 - (q / 3) as f64) * spacing,
                    ((p % 3) as f64 - (q % 3) as f64) * spacing,
                ];
                s += w[p] * w[q] * model.covariance(&h)[(i, j)];
            }
        }
        s
    };
    cov(0, 1) / (cov(0, 0) * cov(1, 1)).sqrt()
}

fn filtering_experiment() -> Outcome {
    let grid = GridSpec::new(vec![64, 64], vec![0.125, 0.125]).unwrap();
    let seed = 42;
    let m1 = bivariate(matern(1.0, 0.5, 1.0), matern(1.0, 0.5, 1.0), 0.5, 1.0, 1.0);
    // a₁₂ = √2 read as a range, i.e. inverse range 1/√2 in this library's convention.
    let m2 = bivariate(
        matern(1.0, 1.0, 1.0),
        matern(1.0, 1.0, 1.0),
        0.5,
        1.0,
        1.0 / 2f64.sqrt(),
    );
    let r1 = filtered_correlation(&ModelSpec::MaternMv(m1.clone()), &grid, 50, seed).unwrap();
    let r2 = filtered_correlation(&ModelSpec::MaternMv(m2.clone()), &grid, 50, seed).unwrap();
    let exact1 = filtered_population_correlation(&m1, 0.125, &FilterStencil::high_pass());
    let exact2 = filtered_population_correlation(&m2, 0.125, &FilterStencil::high_pass());
    let pass = r1.high.abs() < 0.05 && r1.low > 0.4 && (r2.high - 0.25).abs() <= 0.10;
    outcome(
        pass,
        format!(
            "equal-range ν₁₂=1: high {:.4} (exact {exact1:.4}, need |.|<0.05), low {:.4} (need >0.4); \
             equal-smoothness: high {:.4} (exact {exact2:.4}, need 0.25±0.10)",
            r1.high, r1.low, r2.high
        ),
    )
}

fn phase_shift() -> Outcome {
    let grid = GridSpec::unit(vec![64, 64]).unwrap();
    let model =
        ModelSpec::MaternMv(MultiMaternModel::new(2, vec![matern(1.0, 1.0, 0.3)], vec![]).unwrap());
    let base = simulate(&SimRequest {
        model: &model,
        grid: grid.clone(),
        reps: 4,
        seed: 6,
        method: Method::Circulant,
    })
    .unwrap();
    let shifted = base.circular_shift(&[3, 0]);
    let freqs = fourier_frequencies(&grid);
    let mut order: Vec<usize> = (0..freqs.len()).filter(|&k| freqs.norm(k) > 0.0).collect();
    order.sort_by(|&i, &j| freqs.norm(i).total_cmp(&freqs.norm(j)).then(i.cmp(&j)));
    let mut worst = 0.0f64;
    for alpha in [1.5, -1.0] {
        let mut values = Vec::new();
        for r in 0..base.reps() {
            values.extend(shifted.slice(r, 0).iter().map(|z| alpha * z.re));
            values.extend(base.slice(r, 0).iter().map(|z| z.re));
        }
        let field = MultiField::from_real(grid.clone(), 2, base.reps(), values).unwrap();
        let c = replicate_coherence(
            &field,
            &Pairing::same(field.reps()),
            0,
            1,
            &SmoothingKernel::box3(),
            Averaging::Coherence,
        )
        .unwrap();
        let offset = if alpha < 0.0 { PI } else { 0.0 };
        for &k in order.iter().take(10) {
            let want = wrap_phase(offset - 3.0 * freqs.omega(k)[0]);
            worst = worst.max(wrap_phase(c.phase[k] - want).abs());
        }
    }
    outcome(worst < 0.2, format!("u=(3,0), α ∈ {{1.5, -1}}: max phase error {worst:.4} rad over 10 lowest bins (tol 0.2)"))
}

fn analytic_models() -> Vec<(&'static str, ModelSpec)> {
    let gauss = Kernel::Gaussian {
        scale: 0.4,
        weight: 1.3,
    };
    let boxk = Kernel::Box {
        half_width: 0.5,
        weight: 0.8,
    };
    vec![
        (
            "matern",
            ModelSpec::MaternMv(bivariate(
                matern(1.0, 0.5, 1.0),
                matern(2.0, 1.5, 2.0),
                0.4,
                1.2,
                1.8,
            )),
        ),
        (
            "lmc",
            ModelSpec::Lmc(
                LmcModel::new(
                    2,
                    vec![vec![1.0, 0.5], vec![-0.3, 2.0]],
                    vec![matern(1.0, 0.5, 1.0), matern(1.0, 2.0, 3.0)],
                )
                .unwrap(),
            ),
        ),
        (
            "separable",
            ModelSpec::Separable(
                SeparableModel::new(2, vec![vec![1.0, -0.4], vec![-0.4, 0.5]], 1.0, 1.5).unwrap(),
            ),
        ),
        (
            "convolution",
            ModelSpec::Convolution(
                ConvolutionModel::new(
                    2,
                    BaseProcess::Matern(matern(1.0, 1.0, 1.0)),
                    vec![gauss, boxk],
                )
                .unwrap(),
            ),
        ),
    ]
}

/// Spectrum of `Z₁ − F * Z₂`: `f₁₁ − 2 Re(conj(F) f₁₂) + |F|² f₂₂`.
fn residual_spectrum(ps: &PairSpectrum, f: Complex64) -> f64 {
    ps.f11 - 2.0 * (f.conj() * ps.f12).re + f.norm_sqr() * ps.f22
}

fn prediction_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let freqs = random_frequencies(&mut rng, 100);
    let mut worst = 0.0f64;
    let mut suboptimal = 0;
    for (_, model) in analytic_models() {
        for w in &freqs {
            let ps = model.spectral_matrix(w).pair(0, 1);
            let cond = ps.conditional_spectrum().unwrap();
            let f = optimal_transfer(&ps).unwrap();
            let scale = ps.f11.max(f64::MIN_POSITIVE);
            // f_{1|2} = f₁₁ γ², and it is the spectrum of the prediction F * Z₂;
            // the residual carries the rest.
            worst = worst
                .max((cond - ps.f11 * ps.coherence2()).abs() / scale)
                .max((f.norm_sqr() * ps.f22 - cond).abs() / scale)
                .max((residual_spectrum(&ps, f) - (ps.f11 - cond)).abs() / scale);
            for eps in [Complex64::new(0.05, 0.0), Complex64::new(0.0, -0.05)] {
                if residual_spectrum(&ps, f * (1.0 + eps)) < residual_spectrum(&ps, f) {
                    suboptimal += 1;
                }
            }
        }
    }
    let analytic_ok = worst <= 1e-12 && suboptimal == 0;

    // Simulated kernel-smoothed pair; predict Z₂ = K * W from Z₁ = W. Errors
    // are those of the circularly applied filter, computed from the
    // per-replicate periodogram (Parseval).
    let kernel = Kernel::Gaussian {
        scale: 0.5,
        weight: 1.0,
    };
    let model = ModelSpec::Convolution(
        ConvolutionModel::smoothed_pair(2, matern(1.0, 1.0, 1.0), kernel).unwrap(),
    );
    let grid = GridSpec::new(vec![64, 64], vec![0.25, 0.25]).unwrap();
    let reps = 50;
    let field = simulate(&SimRequest {
        model: &model,
        grid: grid.clone(),
        reps,
        seed: 7,
        method: Method::Circulant,
    })
    .unwrap();
    let lattice = fourier_frequencies(&grid);
    let transfer: Vec<Complex64> = (0..lattice.len())
        .map(|k| optimal_transfer(&model.spectral_matrix(lattice.omega(k)).pair(1, 0)).unwrap())
        .collect();
    let perturbed: Vec<Vec<Complex64>> = (0..5)
        .map(|_| {
            // Hermitian perturbation keeps the filter real.
            let mut factors = vec![0.0; lattice.len()];
            for k in 0..lattice.len() {
                let m = lattice.negated(k);
                if m >= k {
                    let u = 1.0 + rng.random_range(-0.2..0.2);
                    factors[k] = u;
                    factors[m] = u;
                }
            }
            transfer.iter().zip(&factors).map(|(f, u)| f * u).collect()
        })
        .collect();
    let mse = |pg: &speccoh::estimate::PeriodogramField, f: &[Complex64]| -> f64 {
        (0..pg.len())
            .map(|k| {
                let ps = PairSpectrum::new(
                    pg.entry(k, 1, 1).re,
                    pg.entry(k, 0, 0).re,
                    pg.entry(k, 1, 0),
                );
                residual_spectrum(&ps, f[k])
            })
            .sum()
    };
    let wins = (0..reps)
        .filter(|&r| {
            let pg = periodogram(&field, r).unwrap();
            let best = mse(&pg, &transfer);
            perturbed.iter().all(|p| mse(&pg, p) > best)
        })
        .count();
    outcome(
        analytic_ok && wins >= 45,
        format!(
            "4 models x 100 frequencies: max relative identity error {worst:.1e} (tol 1e-12), {suboptimal} perturbations beat F; \
             simulated smoothed pair: optimal transfer beats all 5 perturbed transfers in {wins}/{reps} replicates (need 45)"
        ),
    )
}

fn validity_checker() -> Outcome {
    let budget = ValidityBudget::default();
    let (n1, n2) = (0.5, 1.5);
    let bad = bivariate(
        matern(1.0, n1, 1.0),
        matern(1.0, n2, 1.0),
        0.5,
        0.5 * (n1 + n2) - 0.1,
        1.0,
    );
    let witness = match mm_validity_check(&bad, &budget) {
        Validity::Invalid(Violation::Frequency { omega_norm, .. }) if omega_norm.is_finite() => {
            Some(omega_norm)
        }
        _ => None,
    };
    let mut passing = 0;
    let mut total = 0;
    for nu in [0.5, 1.0, 2.5] {
        for a in [0.3, 1.0, 4.0] {
            for rho in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let m = MultiMaternModel::parsimonious(2, [1.0, 2.0], [nu, nu], a, rho).unwrap();
                total += 1;
                passing += usize::from(mm_validity_check(&m, &budget).is_valid());
            }
        }
    }
    outcome(
        witness.is_some() && passing == total,
        format!(
            "ν₁₂ = mean − 0.1 flagged with witness |ω| = {}; parsimonious |ρ| <= 1 valid in {passing}/{total}",
            witness.map_or("none".into(), |w| format!("{w:.4e}"))
        ),
    )
}

fn marginal_params(f: &FitResult) -> MaternParams {
    matern(
        f.get("sigma2").unwrap(),
        f.get("nu").unwrap(),
        f.get("a").unwrap(),
    )
}

fn relative_error(fit: &FitResult, truth: &[(&str, f64)]) -> f64 {
    truth
        .iter()
        .map(|(k, v)| (fit.get(k).unwrap() / v - 1.0).abs())
        .fold(0.0, f64::max)
}

fn lattice_target(grid: &GridSpec, value: impl Fn(&[f64]) -> f64) -> RadialTarget {
    let freqs = fourier_frequencies(grid);
    RadialTarget {
        dim: grid.dims(),
        radii: (0..freqs.len()).map(|k| freqs.norm(k)).collect(),
        values: (0..freqs.len()).map(|k| value(freqs.omega(k))).collect(),
        in_phase: None,
    }
}

/// Monte Carlo calibration setup shared with the fit module documentation.
const CAL_SPACING: f64 = 0.25;
const CAL_BAND_FRACTION: f64 = 0.3;

fn fit_recovery() -> Outcome {
    let mut zero_noise = 0.0f64;
    for (spacing, a) in [(1.0, 0.074), (0.1, 0.74)] {
        let truth = matern(1.0, 0.94, a);
        let grid = GridSpec::new(vec![64, 64], vec![spacing; 2]).unwrap();
        let t = lattice_target(&grid, |w| matern_sdf(w, &truth, 2));
        let fit = fit_matern_marginal(&t, &FitConfig::default()).unwrap();
        zero_noise = zero_noise.max(relative_error(
            &fit,
            &[("sigma2", 1.0), ("nu", 0.94), ("a", a)],
        ));
    }
    let grid = GridSpec::new(vec![32, 32], vec![0.25; 2]).unwrap();
    for (rho, nu12, a12) in [(0.6, 1.4, 1.3), (-0.4, 1.1, 0.9)] {
        let (m1, m2) = (matern(1.0, 1.0, 1.0), matern(1.0, 1.5, 1.2));
        let truth = bivariate(m1, m2, rho, nu12, a12);
        let mut t = lattice_target(&grid, |w| mm_coherence(w, &truth, 0, 1));
        t.in_phase = Some(vec![rho.signum(); t.radii.len()]);
        let fit = fit_matern_cross(&t, (m1, m2), &FitConfig::default()).unwrap();
        zero_noise = zero_noise.max(relative_error(
            &fit,
            &[("rho", rho), ("nu12", nu12), ("a12", a12)],
        ));
    }

    let m = matern(1.0, 1.0, 1.0);
    let model = ModelSpec::MaternMv(bivariate(m, m, 0.5, 1.0, 2f64.sqrt()));
    let grid = GridSpec::new(vec![64, 64], vec![CAL_SPACING; 2]).unwrap();
    let reps = 100;
    let rows: Vec<(u64, [f64; 6], bool)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let field = simulate(&SimRequest {
                model: &model,
                grid: grid.clone(),
                reps,
                seed,
                method: Method::Circulant,
            })
            .unwrap();
            let kernel = SmoothingKernel::box3();
            let pg = smooth(&mean_periodogram(&field).unwrap(), &kernel).unwrap();
            let rmax = (0..pg.len())
                .map(|k| pg.freqs().norm(k))
                .fold(0.0, f64::max);
            let cfg = FitConfig {
                band: Some((0.0, CAL_BAND_FRACTION * rmax)),
                ..Default::default()
            };
            let f0 = fit_matern_marginal(&RadialTarget::from_periodogram(&pg, 0).unwrap(), &cfg)
                .unwrap();
            let f1 = fit_matern_marginal(&RadialTarget::from_periodogram(&pg, 1).unwrap(), &cfg)
                .unwrap();
            let coh = replicate_coherence(
                &field,
                &Pairing::same(reps),
                0,
                1,
                &kernel,
                Averaging::Coherence,
            )
            .unwrap();
            let fc = fit_matern_cross(
                &RadialTarget::from_coherence(&coh),
                (marginal_params(&f0), marginal_params(&f1)),
                &cfg,
            )
            .unwrap();
            let v = [
                f0.get("nu").unwrap().min(f1.get("nu").unwrap()),
                f0.get("nu").unwrap().max(f1.get("nu").unwrap()),
                f0.get("a").unwrap().min(f1.get("a").unwrap()),
                f0.get("a").unwrap().max(f1.get("a").unwrap()),
                fc.get("rho").unwrap(),
                fc.get("a12").unwrap(),
            ];
            let inside = (0.8..=1.2).contains(&v[0])
                && (0.8..=1.2).contains(&v[1])
                && (0.7..=1.4).contains(&v[2])
                && (0.7..=1.4).contains(&v[3])
                && (0.35..=0.65).contains(&v[4])
                && (1.1..=1.8).contains(&v[5]);
            (seed, v, inside)
        })
        .collect();
    let hits = rows.iter().filter(|r| r.2).count();
    let range = |i: usize, j: usize| {
        let lo = rows.iter().map(|r| r.1[i]).fold(f64::INFINITY, f64::min);
        let hi = rows
            .iter()
            .map(|r| r.1[j])
            .fold(f64::NEG_INFINITY, f64::max);
        format!("[{lo:.3}, {hi:.3}]")
    };
    outcome(
        zero_noise <= 1e-4 && hits >= 18,
        format!(
            "zero-noise max relative error {zero_noise:.1e} (tol 1e-4); Monte Carlo {hits}/20 seeds inside \
             (need 18): ν̂ {} â {} ρ̂ {} â₁₂ {}",
            range(0, 1),
            range(2, 3),
            range(4, 4),
            range(5, 5)
        ),
    )
}

fn lagged_coherence_smoke() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let model = dir.path().join("m.json");
    let m = matern(1.0, 1.0, 1.0);
    std::fs::write(
        &model,
        ModelSpec::MaternMv(bivariate(m, m, 0.5, 1.0, 1.0)).to_json(),
    )
    .unwrap();
    let field = dir.path().join("f.mfld");
    let csv = dir.path().join("coh.csv");
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_speccoh"))
            .args(args)
            .output()
            .unwrap()
    };
    let p = |x: &std::path::Path| x.to_str().unwrap().to_string();
    let sim = run(&[
        "simulate",
        "--model",
        &p(&model),
        "--grid",
        "32,32",
        "--reps",
        "3",
        "--seed",
        "10",
        "--out",
        &p(&field),
    ]);
    let coh = run(&[
        "coherence",
        "--input",
        &p(&field),
        "--lag",
        "1",
        "--out",
        &p(&csv),
    ]);
    if !sim.status.success() || !coh.status.success() {
        return outcome(
            false,
            format!("cli failed: {}", String::from_utf8_lossy(&coh.stderr)),
        );
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header_ok = lines.next() == Some("w1,w2,coh2,abs_coh,phase,gain");
    let rows: Vec<Option<Vec<f64>>> = lines
        .map(|l| {
            l.split(',')
                .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        })
        .collect();
    let well_formed = rows
        .iter()
        .all(|r| r.as_ref().is_some_and(|v| v.len() == 6));
    let coh2: Vec<f64> = rows.iter().flatten().map(|v| v[2]).collect();
    let in_range = coh2.iter().all(|c| (0.0..=1.0).contains(c));
    let (lo, hi) = (
        coh2.iter().copied().fold(f64::INFINITY, f64::min),
        coh2.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    outcome(
        header_ok && well_formed && rows.len() == 1024 && in_range,
        format!("`coherence --lag 1` on 3 replicates: {} rows, header ok {header_ok}, γ̂² in [{lo:.4}, {hi:.4}]", rows.len()),
    )
}

fn main() {
    let criteria: [(u32, &str, f64, fn() -> Outcome); 10] = [
        (1, "Parseval identity", 10.0, parseval),
        (2, "brute-force DFT oracle", f64::INFINITY, brute_force_dft),
        (
            3,
            "constant-coherence constructions",
            f64::INFINITY,
            constant_coherence,
        ),
        (4, "coherence curve endpoints", 1.0, figure_endpoints),
        (5, "filtering experiment", 120.0, filtering_experiment),
        (6, "phase-shift recovery", 30.0, phase_shift),
        (
            7,
            "prediction identities",
            f64::INFINITY,
            prediction_identities,
        ),
        (8, "validity checker", 1.0, validity_checker),
        (9, "fit recovery", 300.0, fit_recovery),
        (
            10,
            "lagged coherence pipeline",
            f64::INFINITY,
            lagged_coherence_smoke,
        ),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let timely = secs < limit;
        let pass = out.pass && timely;
        failed += usize::from(!pass);
        let budget = if limit.is_finite() {
            format!(", limit {limit} s")
        } else {
            String::new()
        };
        println!(
            "criterion {id:>2} {} {name}: {} ({secs:.2} s{budget})",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
