//! FFT-backed causal convolution with a fixed kernel and power-series
//! reciprocals of Toeplitz kernels.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Below this length the direct sum is cheaper than two FFTs.
const DIRECT_LIMIT: usize = 96;

/// Causal convolution `out[k] = sum_{i<=k} kernel[i] * signal[k - i]` for
/// signals no longer than the kernel. The kernel spectrum is computed once.
pub struct CausalKernel {
    kernel: Vec<f64>,
    fft_len: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CausalKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CausalKernel").field("len", &self.kernel.len()).field("fft_len", &self.fft_len).finish()
    }
}

impl CausalKernel {
    pub fn new(kernel: Vec<f64>) -> Self {
        let fft_len = (2 * kernel.len()).next_power_of_two().max(2);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum: Vec<Complex<f64>> = kernel.iter().map(|&x| Complex::new(x, 0.0)).collect();
        spectrum.resize(fft_len, Complex::new(0.0, 0.0));
        forward.process(&mut spectrum);
        CausalKernel { kernel, fft_len, spectrum, forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.kernel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.is_empty()
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// Convolve one signal; only the first `signal.len()` outputs are returned.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        self.apply_pair(signal, None).0
    }

    /// Convolve many signals, packing two real signals per complex transform.
    pub fn apply_many(&self, signals: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(signals.len());
        for pair in signals.chunks(2) {
            let (a, b) = self.apply_pair(&pair[0], pair.get(1).map(|v| v.as_slice()));
            out.push(a);
            if let Some(b) = b {
                out.push(b);
            }
        }
        out
    }

    fn apply_pair(&self, a: &[f64], b: Option<&[f64]>) -> (Vec<f64>, Option<Vec<f64>>) {
        assert!(a.len() <= self.kernel.len(), "signal longer than kernel");
        if let Some(b) = b {
            assert!(b.len() <= self.kernel.len(), "signal longer than kernel");
        }
        let longest = a.len().max(b.map_or(0, |b| b.len()));
        if longest <= DIRECT_LIMIT {
            return (self.direct(a), b.map(|b| self.direct(b)));
        }
        // Only the leading `longest` outputs are needed, so a transform of
        // length >= 2 * longest avoids wrap-around.
        let n = (2 * longest).next_power_of_two();
        if n < self.fft_len {
            let short = CausalKernel::new(self.kernel[..longest].to_vec());
            return short.apply_pair(a, b);
        }
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (k, &x) in a.iter().enumerate() {
            buf[k].re = x;
        }
        if let Some(b) = b {
            for (k, &x) in b.iter().enumerate() {
                buf[k].im = x;
            }
        }
        self.forward.process(&mut buf);
        for (z, s) in buf.iter_mut().zip(&self.spectrum) {
            *z *= s;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        let ra = buf[..a.len()].iter().map(|z| z.re * scale).collect();
        let rb = b.map(|b| buf[..b.len()].iter().map(|z| z.im * scale).collect());
        (ra, rb)
    }

    fn direct(&self, signal: &[f64]) -> Vec<f64> {
        (0..signal.len()).map(|k| (0..=k).map(|i| self.kernel[i] * signal[k - i]).sum()).collect()
    }
}

/// First `len` coefficients of the product of two power series.
pub fn series_product(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let a = &a[..a.len().min(len)];
    let b = &b[..b.len().min(len)];
    if a.len().min(b.len()) <= DIRECT_LIMIT {
        let mut out = vec![0.0; len];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                if i + j < len {
                    out[i + j] += x * y;
                }
            }
        }
        return out;
    }
    let n = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for (k, &x) in a.iter().enumerate() {
        buf[k].re = x;
    }
    for (k, &y) in b.iter().enumerate() {
        buf[k].im = y;
    }
    fwd.process(&mut buf);
    // Split the packed transform into the spectra of a and b, then multiply.
    let mut prod = vec![Complex::new(0.0, 0.0); n];
    for k in 0..n {
        let z = buf[k];
        let zc = buf[(n - k) % n].conj();
        let fa = (z + zc) * 0.5;
        let fb = (z - zc) * Complex::new(0.0, -0.5);
        prod[k] = fa * fb;
    }
    inv.process(&mut prod);
    let scale = 1.0 / n as f64;
    let mut out: Vec<f64> = prod.iter().take(len).map(|z| z.re * scale).collect();
    out.resize(len, 0.0);
    out
}

/// First `len` coefficients of `1 / v(z)` for a power series with `v[0] != 0`,
/// by Newton iteration `u <- u (2 - v u)` doubling the precision each step.
pub fn series_reciprocal(v: &[f64], len: usize) -> Vec<f64> {
    assert!(v[0] != 0.0, "series has no reciprocal");
    let mut u = vec![1.0 / v[0]];
    let mut m = 1;
    while m < len {
        let m2 = (2 * m).min(len);
        let mut vu = series_product(&v[..v.len().min(m2)], &u, m2);
        for x in vu.iter_mut() {
            *x = -*x;
        }
        vu[0] += 2.0;
        u = series_product(&u, &vu, m2);
        m = m2;
    }
    u.truncate(len);
    u
}
