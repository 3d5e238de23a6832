//! Real 3D FFT on an `n³` grid, x fastest.
//!
//! The half spectrum keeps `kx ∈ [0, n/2]` and is stored with kx fastest,
//! then ky, then kz. Forward is unscaled; inverse is scaled by `1/n³`.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    n: usize,
    nxh: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    real_scratch: Vec<Complex64>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut rp = RealFftPlanner::<f64>::new();
        let r2c = rp.plan_fft_forward(n);
        let c2r = rp.plan_fft_inverse(n);
        let mut cp = FftPlanner::<f64>::new();
        let fwd = cp.plan_fft_forward(n);
        let inv = cp.plan_fft_inverse(n);
        let nxh = n / 2 + 1;
        let real_scratch_len = r2c.get_scratch_len().max(c2r.get_scratch_len());
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Fft3 {
            n,
            nxh,
            r2c,
            c2r,
            fwd,
            inv,
            real_scratch: vec![Complex64::default(); real_scratch_len],
            line: vec![Complex64::default(); nxh * n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-spectrum length `(n/2 + 1) n²`.
    pub fn spectrum_len(&self) -> usize {
        self.nxh * self.n * self.n
    }

    /// Forward transform. `input` is used as scratch and left unspecified.
    pub fn forward(&mut self, input: &mut [f64], out: &mut [Complex64]) {
        let (n, nxh) = (self.n, self.nxh);
        debug_assert_eq!(input.len(), n * n * n);
        debug_assert_eq!(out.len(), self.spectrum_len());
        for (row_in, row_out) in input.chunks_exact_mut(n).zip(out.chunks_exact_mut(nxh)) {
            self.r2c
                .process_with_scratch(row_in, row_out, &mut self.real_scratch)
                .expect("r2c buffer sizes");
        }
        self.pass_y(out, true);
        self.pass_z(out, true);
    }

    /// Inverse transform scaled by `1/n³`. `spec` is used as scratch.
    pub fn inverse(&mut self, spec: &mut [Complex64], out: &mut [f64]) {
        let (n, nxh) = (self.n, self.nxh);
        self.pass_z(spec, false);
        self.pass_y(spec, false);
        for (row_in, row_out) in spec.chunks_exact_mut(nxh).zip(out.chunks_exact_mut(n)) {
            // imaginary parts of the kx = 0 and Nyquist bins are roundoff here; realfft
            // reports them but still produces the Hermitian-projected result
            let _ = self.c2r.process_with_scratch(row_in, row_out, &mut self.real_scratch);
        }
        let scale = 1.0 / (n * n * n) as f64;
        for v in out.iter_mut() {
            *v *= scale;
        }
    }

    fn pass_y(&mut self, data: &mut [Complex64], forward: bool) {
        let (n, nxh) = (self.n, self.nxh);
        let plan = if forward { &self.fwd } else { &self.inv };
        for k in 0..n {
            let plane = &mut data[nxh * n * k..nxh * n * (k + 1)];
            for j in 0..n {
                for kx in 0..nxh {
                    self.line[kx * n + j] = plane[kx + nxh * j];
                }
            }
            plan.process_with_scratch(&mut self.line, &mut self.scratch);
            for j in 0..n {
                for kx in 0..nxh {
                    plane[kx + nxh * j] = self.line[kx * n + j];
                }
            }
        }
    }

    fn pass_z(&mut self, data: &mut [Complex64], forward: bool) {
        let (n, nxh) = (self.n, self.nxh);
        let plan = if forward { &self.fwd } else { &self.inv };
        for j in 0..n {
            for k in 0..n {
                let base = nxh * (j + n * k);
                for kx in 0..nxh {
                    self.line[kx * n + k] = data[base + kx];
                }
            }
            plan.process_with_scratch(&mut self.line, &mut self.scratch);
            for k in 0..n {
                let base = nxh * (j + n * k);
                for kx in 0..nxh {
                    data[base + kx] = self.line[kx * n + k];
                }
            }
        }
    }

    /// Inner-product weight of half-spectrum column `kx`: 2 if its mirror is not stored.
    pub fn weight(&self, kx: usize) -> f64 {
        if kx == 0 || 2 * kx == self.n {
            1.0
        } else {
            2.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn naive_dft(x: &[f64], n: usize, q: [usize; 3]) -> Complex64 {
        let mut s = Complex64::default();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let ph = -TAU * ((q[0] * i + q[1] * j + q[2] * k) as f64) / n as f64;
                    s += x[i + n * (j + n * k)] * Complex64::from_polar(1.0, ph);
                }
            }
        }
        s
    }

    #[test]
    fn matches_naive_dft_and_round_trips() {
        for n in [2usize, 3, 4, 6] {
            let x: Vec<f64> = (0..n * n * n).map(|v| ((v * 37 % 11) as f64).sin()).collect();
            let mut f = Fft3::new(n);
            let mut inp = x.clone();
            let mut spec = vec![Complex64::default(); f.spectrum_len()];
            f.forward(&mut inp, &mut spec);
            let nxh = n / 2 + 1;
            for kz in 0..n {
                for ky in 0..n {
                    for kx in 0..nxh {
                        let e = naive_dft(&x, n, [kx, ky, kz]);
                        let g = spec[kx + nxh * (ky + n * kz)];
                        assert!((e - g).norm() < 1e-10, "n={n} q=({kx},{ky},{kz})");
                    }
                }
            }
            let mut back = vec![0.0; n * n * n];
            f.inverse(&mut spec, &mut back);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
