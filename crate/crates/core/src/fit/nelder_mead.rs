/// Derivative-free simplex minimizer with standard coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½).
#[derive(Clone, Debug, PartialEq)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Stop once the objective spread over the simplex is at most
    /// `f_tol · (|f_best| + f_tol)`.
    pub f_tol: f64,
    /// ...and the simplex diameter is at most `x_tol`.
    pub x_tol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: 1e-8,
            x_tol: 1e-8,
            step: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, start: &[f64]) -> Minimum {
        let n = start.len();
        let eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((start.to_vec(), eval(start)));
        for i in 0..n {
            let mut x = start.to_vec();
            x[i] += self.step;
            let v = eval(&x);
            simplex.push((x, v));
        }
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if self.done(&simplex) {
                converged = true;
                break;
            }
            iterations += 1;
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let (best, second_worst, worst) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);
            let xr = along(1.0);
            let fr = eval(&xr);
            if fr < best {
                let xe = along(2.0);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < second_worst {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < worst {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for (x, v) in simplex.iter_mut().skip(1) {
                for (xi, ai) in x.iter_mut().zip(&anchor) {
                    *xi = ai + 0.5 * (*xi - ai);
                }
                *v = eval(x);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if !converged {
            converged = self.done(&simplex);
        }
        let (x, f) = simplex.swap_remove(0);
        Minimum {
            x,
            f,
            iterations,
            converged,
        }
    }

    fn done(&self, sorted: &[(Vec<f64>, f64)]) -> bool {
        let best = sorted[0].1;
        let spread = sorted[sorted.len() - 1].1 - best;
        let diameter = sorted
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&sorted[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        spread <= self.f_tol * (best.abs() + self.f_tol) && diameter <= self.x_tol
    }
}
