//! Multi-dimensional FFT on row-major arrays and centered-frequency reordering.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Plans for a full d-dimensional transform of a fixed shape.
#[derive(Clone)]
pub(crate) struct NdFft {
    shape: Vec<usize>,
    strides: Vec<usize>,
    plans: Vec<Arc<dyn Fft<f64>>>,
}

impl NdFft {
    /// `inverse = true` uses `e^{+2 pi i k j / n}`; no normalization either way.
    pub(crate) fn new(shape: &[usize], inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
        let plans = shape.iter().map(|&n| planner.plan_fft(n, dir)).collect();
        let d = shape.len();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        NdFft { shape: shape.to_vec(), strides, plans }
    }

    pub(crate) fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub(crate) fn process(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        let d = self.shape.len();
        let total = data.len();
        for axis in 0..d {
            let n = self.shape[axis];
            let s = self.strides[axis];
            let plan = &self.plans[axis];
            if s == 1 {
                plan.process(data);
                continue;
            }
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let block = n * s;
            for outer in (0..total).step_by(block) {
                for inner in 0..s {
                    let base = outer + inner;
                    for k in 0..n {
                        line[k] = data[base + k * s];
                    }
                    plan.process(&mut line);
                    for k in 0..n {
                        data[base + k * s] = line[k];
                    }
                }
            }
        }
    }
}

/// DFT bin of the centered position `jpos`, where `jpos = j + n/2`.
#[inline]
pub(crate) fn centered_to_bin(jpos: usize, n: usize) -> usize {
    (jpos + n - n / 2) % n
}

/// Permutation table mapping centered flat index to DFT flat index.
pub(crate) fn centered_permutation(shape: &[usize]) -> Vec<usize> {
    let d = shape.len();
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let total: usize = shape.iter().product();
    (0..total)
        .map(|idx| (0..d).map(|k| centered_to_bin((idx / strides[k]) % shape[k], shape[k]) * strides[k]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft_2d() {
        let shape = [4usize, 6];
        let data: Vec<Complex64> =
            (0..24).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut fast = data.clone();
        NdFft::new(&shape, false).process(&mut fast);
        for a in 0..4 {
            for b in 0..6 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..4 {
                    for k in 0..6 {
                        let ph = -2.0 * std::f64::consts::PI * ((a * j) as f64 / 4.0 + (b * k) as f64 / 6.0);
                        acc += data[j * 6 + k] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - fast[a * 6 + b]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn centered_bins() {
        assert_eq!(centered_to_bin(0, 4), 2);
        assert_eq!(centered_to_bin(2, 4), 0);
        assert_eq!(centered_to_bin(3, 4), 1);
        assert_eq!(centered_to_bin(0, 5), 3);
        assert_eq!(centered_to_bin(2, 5), 0);
    }
}
