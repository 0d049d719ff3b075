use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speccoh::estimate::{coherence, periodogram, smooth, SmoothingKernel};
use speccoh::{fourier_frequencies, GridSpec, MultiField};
use std::f64::consts::PI;

fn random_field(
    sizes: Vec<usize>,
    spacings: Vec<f64>,
    p: usize,
    real: bool,
    seed: u64,
) -> MultiField {
    let grid = GridSpec::new(sizes, spacings).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len() * p)
        .map(|_| {
            let im = if real {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            };
            Complex64::new(rng.random_range(-1.0..1.0), im)
        })
        .collect();
    MultiField::new(grid, p, 1, values).unwrap()
}

/// Direct O(N²) evaluation of δ/((2π)^d N) S_k conj(S_l).
fn direct(field: &MultiField, k: usize, l: usize, omega: &[f64]) -> Complex64 {
    let g = field.grid();
    let sum = |var: usize| {
        (0..g.len())
            .map(|j| {
                let s = g.coords(j);
                let phase: f64 = s.iter().zip(omega).map(|(a, b)| a * b).sum();
                field.get(0, var, j) * Complex64::from_polar(1.0, -phase)
            })
            .sum::<Complex64>()
    };
    let c = g.cell_volume() / ((2.0 * PI).powi(g.dims() as i32) * g.len() as f64);
    sum(k) * sum(l).conj() * c
}

fn rel_err(a: Complex64, b: Complex64, scale: f64) -> f64 {
    (a - b).norm() / scale.max(f64::MIN_POSITIVE)
}

#[test]
fn fft_matches_direct_sum_on_all_small_grids() {
    let mut seed = 0;
    let mut shapes: Vec<Vec<usize>> = (1..=8).map(|n| vec![n]).collect();
    for n1 in 1..=8 {
        for n2 in 1..=8 {
            shapes.push(vec![n1, n2]);
        }
    }
    for sizes in shapes {
        for p in 1..=3 {
            seed += 1;
            let spacings: Vec<f64> = (0..sizes.len()).map(|i| 0.5 + 0.75 * i as f64).collect();
            let field = random_field(sizes.clone(), spacings, p, false, seed);
            let pg = periodogram(&field, 0).unwrap();
            for f in 0..pg.len() {
                let omega = pg.freqs().omega(f);
                let diag: Vec<f64> = (0..p).map(|k| pg.entry(f, k, k).re).collect();
                for k in 0..p {
                    for l in 0..p {
                        let want = direct(&field, k, l, omega);
                        let scale = (diag[k] * diag[l]).sqrt().max(want.norm());
                        assert!(
                            rel_err(pg.entry(f, k, l), want, scale) < 1e-10,
                            "sizes {sizes:?} p {p} f {f} ({k},{l})"
                        );
                    }
                }
            }
        }
    }
}

fn grid_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop_oneof![
        (1usize..=32, 0.1f64..3.0).prop_map(|(n, d)| (vec![n], vec![d])),
        (1usize..=32, 1usize..=32, 0.1f64..3.0, 0.1f64..3.0)
            .prop_map(|(a, b, d1, d2)| (vec![a, b], vec![d1, d2])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval((sizes, spacings) in grid_strategy(), seed in any::<u64>()) {
        let field = random_field(sizes, spacings, 2, false, seed);
        let pg = periodogram(&field, 0).unwrap();
        let dw = field.grid().frequency_cell();
        for k in 0..2 {
            let lhs: f64 = (0..pg.len()).map(|f| pg.entry(f, k, k).re).sum::<f64>() * dw;
            let rhs = field.slice(0, k).iter().map(|z| z.norm_sqr()).sum::<f64>() / field.grid().len() as f64;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }
    }

    #[test]
    fn hermitian_and_rank_one((sizes, spacings) in grid_strategy(), seed in any::<u64>()) {
        let field = random_field(sizes, spacings, 3, false, seed);
        let pg = periodogram(&field, 0).unwrap();
        for f in 0..pg.len() {
            for k in 0..3 {
                prop_assert_eq!(pg.entry(f, k, k).im, 0.0);
                for l in 0..3 {
                    prop_assert_eq!(pg.entry(f, k, l), pg.entry(f, l, k).conj());
                    let lhs = (pg.entry(f, k, l) * pg.entry(f, l, k)).re;
                    let rhs = pg.entry(f, k, k).re * pg.entry(f, l, l).re;
                    prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(f64::MIN_POSITIVE));
                }
            }
        }
    }

    #[test]
    fn real_fields_are_conjugate_symmetric((sizes, spacings) in grid_strategy(), seed in any::<u64>()) {
        let field = random_field(sizes, spacings, 2, true, seed);
        let pg = periodogram(&field, 0).unwrap();
        let scale = (0..pg.len()).map(|f| pg.entry(f, 0, 0).re).fold(0.0, f64::max);
        for f in 0..pg.len() {
            let g = pg.freqs().negated(f);
            let d = (pg.entry(g, 0, 1) - pg.entry(f, 0, 1).conj()).norm();
            prop_assert!(d <= 1e-10 * scale.max(1e-300));
        }
    }

    #[test]
    fn circular_shift_changes_no_modulus_or_coherence(
        n1 in 3usize..=16,
        n2 in 3usize..=16,
        u1 in -20i64..20,
        u2 in -20i64..20,
        seed in any::<u64>(),
    ) {
        let field = random_field(vec![n1, n2], vec![1.0, 0.5], 2, true, seed);
        let shifted = field.circular_shift(&[u1, u2]);
        let (a, b) = (periodogram(&field, 0).unwrap(), periodogram(&shifted, 0).unwrap());
        let k = SmoothingKernel::box3();
        let (ca, cb) = (
            coherence(&smooth(&a, &k).unwrap(), 0, 1).unwrap(),
            coherence(&smooth(&b, &k).unwrap(), 0, 1).unwrap(),
        );
        for f in 0..a.len() {
            for i in 0..2 {
                for j in 0..2 {
                    let (x, y) = (a.entry(f, i, j).norm(), b.entry(f, i, j).norm());
                    prop_assert!((x - y).abs() <= 1e-10 * x.max(1e-12));
                }
            }
            prop_assert!((ca.coh2[f] - cb.coh2[f]).abs() <= 1e-10);
        }
    }

    #[test]
    fn smoothed_coherence_is_bounded((sizes, spacings) in grid_strategy(), seed in any::<u64>()) {
        prop_assume!(sizes.iter().all(|&n| n >= 3));
        let field = random_field(sizes.clone(), spacings, 2, false, seed);
        let kernel = if sizes.len() == 1 {
            SmoothingKernel::boxcar(1, 3).unwrap()
        } else {
            SmoothingKernel::box3()
        };
        let c = coherence(&smooth(&periodogram(&field, 0).unwrap(), &kernel).unwrap(), 0, 1).unwrap();
        for f in 0..c.len() {
            prop_assert!((0.0..=1.0 + 1e-10).contains(&c.coh2[f]));
            prop_assert!(c.phase[f] > -PI && c.phase[f] <= PI);
        }
    }

    #[test]
    fn frequency_set_is_closed_under_negation((sizes, spacings) in grid_strategy()) {
        let grid = GridSpec::new(sizes, spacings).unwrap();
        let freqs = fourier_frequencies(&grid);
        prop_assert_eq!(freqs.len(), grid.len());
        for f in 0..freqs.len() {
            let g = freqs.negated(f);
            for (axis, (a, b)) in freqs.omega(f).iter().zip(freqs.omega(g)).enumerate() {
                let period = 2.0 * PI / grid.spacings()[axis];
                let m = (a + b) / period;
                prop_assert!((m - m.round()).abs() < 1e-9);
            }
        }
    }
}
