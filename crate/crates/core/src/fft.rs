//! Multi-dimensional FFT on cubic arrays, built from rustfft line transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// In-place FFT of a `m^dim` array stored first-axis-fastest. The inverse is
/// normalized by `1 / m^dim`.
pub(crate) fn fft_nd(data: &mut [Complex64], m: usize, dim: usize, inverse: bool) {
    debug_assert_eq!(data.len(), m.pow(dim as u32));
    let mut planner = FftPlanner::<f64>::new();
    let plan: Arc<dyn Fft<f64>> = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    for axis in 0..dim {
        transform_axis(data, m, axis, &plan);
    }
    if inverse {
        let scale = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }
}

fn transform_axis(data: &mut [Complex64], m: usize, axis: usize, plan: &Arc<dyn Fft<f64>>) {
    if axis == 0 {
        data.par_chunks_mut(m).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, line| plan.process_with_scratch(line, scratch),
        );
        return;
    }
    let stride = m.pow(axis as u32);
    let block = stride * m;
    let n_lines = data.len() / m;
    let src: &[Complex64] = data;
    let lines: Vec<Vec<Complex64>> = (0..n_lines)
        .into_par_iter()
        .map_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, l| {
                let (outer, inner) = (l / stride, l % stride);
                let start = outer * block + inner;
                let mut line: Vec<Complex64> = (0..m).map(|k| src[start + k * stride]).collect();
                plan.process_with_scratch(&mut line, scratch);
                line
            },
        )
        .collect();
    for (l, line) in lines.into_iter().enumerate() {
        let (outer, inner) = (l / stride, l % stride);
        let start = outer * block + inner;
        for (k, v) in line.into_iter().enumerate() {
            data[start + k * stride] = v;
        }
    }
}

/// Signed frequency index of FFT bin `k` on a length-`m` axis.
pub(crate) fn signed_freq(k: usize, m: usize) -> f64 {
    if k <= m / 2 {
        k as f64
    } else {
        k as f64 - m as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_3d() {
        let m = 6;
        let orig: Vec<Complex64> = (0..m * m * m)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        fft_nd(&mut data, m, 3, false);
        fft_nd(&mut data, m, 3, true);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let m = 8;
        let mut data = vec![Complex64::default(); m * m];
        data[0] = Complex64::new(1.0, 0.0);
        fft_nd(&mut data, m, 2, false);
        assert!(data.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-14));
    }
}
