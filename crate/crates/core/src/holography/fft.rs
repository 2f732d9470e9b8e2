use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unitary 2D FFT on a square, row-major N×N buffer.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self { n, forward, inverse, scratch: vec![Complex64::default(); len] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        let fft = Arc::clone(&self.forward);
        self.apply(fft.as_ref(), buf);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        let fft = Arc::clone(&self.inverse);
        self.apply(fft.as_ref(), buf);
    }

    fn apply(&mut self, fft: &dyn Fft<f64>, buf: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(buf.len(), n * n, "buffer is not {n}x{n}");
        fft.process_with_scratch(buf, &mut self.scratch);
        transpose_in_place(buf, n);
        fft.process_with_scratch(buf, &mut self.scratch);
        transpose_in_place(buf, n);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

fn transpose_in_place(buf: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}
