use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized in-place DFT over a row-major array with the given axis sizes.
///
/// Forward computes `Σ x_j exp(-2πi j·f/n)`; inverse uses the positive sign.
pub(crate) fn fft_nd(data: &mut [Complex64], sizes: &[usize], direction: FftDirection) {
    let total: usize = sizes.iter().product();
    assert_eq!(data.len(), total);
    let mut stride = 1;
    let mut line = Vec::new();
    for &n in sizes.iter().rev() {
        if n > 1 {
            let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            line.resize(n, Complex64::new(0.0, 0.0));
            let block = n * stride;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (k, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
        stride *= n;
    }
}

pub(crate) fn forward(data: &mut [Complex64], sizes: &[usize]) {
    fft_nd(data, sizes, FftDirection::Forward);
}

pub(crate) fn inverse(data: &mut [Complex64], sizes: &[usize]) {
    fft_nd(data, sizes, FftDirection::Inverse);
}
