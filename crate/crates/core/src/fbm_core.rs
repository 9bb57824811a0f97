//! Fractional Brownian motion: covariance, exact samplers, and the discrete
//! Mandelbrot-Van Ness coupling between a Wiener path and an fBm path.
//!
//! The coupling is discretized so that the two directions are exact inverses
//! of each other. Recovery applies the L1 Marchaud scheme of order
//! `kappa = H - 1/2` to the fBm increments, `dW = K^{-1} (v * dB)`, and
//! construction applies the convolution inverse `u = v^{-1}`,
//! `dB = K (u * dW)`, where `K = c_H Gamma(H + 1/2)`.

use crate::conv::{series_reciprocal, CausalKernel};
use crate::error::{invalid, Error, Result};
use crate::frac_calculus::l1_increment_weights;
use crate::grid::{Hurst, Path, TimeGrid};
use crate::quad::{checked, graded_breaks};
use crate::rng::{normals, ReplicaRng};
use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use statrs::function::gamma::gamma;
use std::sync::Arc;

/// Default size cap of the dense Cholesky oracle.
pub const CHOLESKY_CAP: usize = 2048;

/// Default left-tail length as a multiple of the horizon.
pub const DEFAULT_TAIL_FACTOR: f64 = 50.0;

/// `R(s, t) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(s: f64, t: f64, h: Hurst) -> f64 {
    let e = 2.0 * h.value();
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

/// Autocovariance of fractional Gaussian noise with step `dt` at lag `k`.
pub fn fgn_autocovariance(lag: usize, h: Hurst, dt: f64) -> f64 {
    let e = 2.0 * h.value();
    let k = lag as f64;
    let raw = if lag == 0 { 1.0 } else { 0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).powf(e)) };
    raw * dt.powf(e)
}

/// Mandelbrot-Van Ness normalization `c_H` making `Var(B_1) = 1`, by
/// quadrature of the squared kernel norm
/// `int_0^inf ((1 + s)^k - s^k)^2 ds + 1 / (2H)` with `k = H - 1/2`.
pub fn mvn_normalizer(h: Hurst) -> Result<f64> {
    h.require_long_memory()?;
    let k = h.kappa();
    let breaks = graded_breaks(0.0, 1.0, 1e-30, 8);
    // s in [0, 1] directly; s in [1, inf) via s = 1 / t.
    let near = checked("kernel norm on [0, 1]", 1e-10, |rule| {
        rule.composite(&breaks, |s| {
            let d = (1.0 + s).powf(k) - s.powf(k);
            d * d
        })
    })?;
    // The far part behaves like t^{-2k} at t = 0; t = s^p with p = 1/(1 - 2k)
    // removes the singularity.
    let p = 1.0 / (1.0 - 2.0 * k);
    let far = checked("kernel norm on [1, inf)", 1e-10, |rule| {
        rule.composite(&breaks, |s| {
            if s == 0.0 {
                return 0.0;
            }
            let t = s.powf(p);
            let d = (k * t.ln_1p()).exp_m1() / t;
            p * s.powf(p - 1.0) * t.powf(-2.0 * k) * d * d
        })
    })?;
    Ok((near + far + 1.0 / (2.0 * h.value())).powf(-0.5))
}

/// Coupling constant `K = c_H Gamma(H + 1/2)`: `D^{H-1/2} B = K W`.
pub fn coupling_constant(h: Hurst) -> Result<f64> {
    Ok(mvn_normalizer(h)? * gamma(h.value() + 0.5))
}

/// Reusable circulant-embedding sampler of fractional Gaussian noise.
pub struct CirculantSampler {
    steps: usize,
    sqrt_eigs: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler").field("steps", &self.steps).finish()
    }
}

impl CirculantSampler {
    /// Embeds the `steps x steps` fGn covariance in a circulant of size
    /// `2 N` with `N >= steps` a power of two. Negative eigenvalues down to
    /// `-1e-10` of the largest are clipped to zero; anything below is an error.
    pub fn new(grid: TimeGrid, h: Hurst) -> Result<Self> {
        let steps = grid.steps();
        let n = steps.next_power_of_two();
        let m = 2 * n;
        let dt = grid.dt();
        let mut row = vec![Complex::new(0.0, 0.0); m];
        for (k, slot) in row.iter_mut().enumerate() {
            let lag = if k <= n { k } else { m - k };
            slot.re = fgn_autocovariance(lag, h, dt);
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let min = row.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        if min < -1e-10 * max {
            return Err(Error::NegativeEigenvalue { value: min, max });
        }
        let sqrt_eigs = row.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(CirculantSampler { steps, sqrt_eigs, fft })
    }

    /// Two independent fGn increment sequences.
    pub fn sample_pair(&self, rng: &mut ReplicaRng) -> (Vec<f64>, Vec<f64>) {
        let m = self.sqrt_eigs.len();
        let re = normals(rng, m, 1.0);
        let im = normals(rng, m, 1.0);
        let mut buf: Vec<Complex<f64>> =
            self.sqrt_eigs.iter().zip(re.iter().zip(&im)).map(|(s, (a, b))| Complex::new(s * a, s * b)).collect();
        self.fft.process(&mut buf);
        let a = buf[..self.steps].iter().map(|z| z.re).collect();
        let b = buf[..self.steps].iter().map(|z| z.im).collect();
        (a, b)
    }

    /// `dim` independent increment sequences.
    pub fn sample_increments(&self, dim: usize, rng: &mut ReplicaRng) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(dim);
        while out.len() < dim {
            let (a, b) = self.sample_pair(rng);
            out.push(a);
            if out.len() < dim {
                out.push(b);
            }
        }
        out
    }
}

/// Exact fBm sample with `dim` independent components by circulant embedding.
pub fn sample_fbm_exact(grid: TimeGrid, h: Hurst, dim: usize, rng: &mut ReplicaRng) -> Result<Path> {
    let sampler = CirculantSampler::new(grid, h)?;
    Path::from_increments(grid, &sampler.sample_increments(dim, rng))
}

/// Dense-factorization fBm sampler, the oracle for [`sample_fbm_exact`].
pub fn sample_fbm_cholesky(grid: TimeGrid, h: Hurst, dim: usize, rng: &mut ReplicaRng, cap: usize) -> Result<Path> {
    let n = grid.steps();
    if n > cap {
        return Err(Error::SizeCap { n, cap });
    }
    let times: Vec<f64> = (1..=n).map(|k| grid.time(k)).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(times[i], times[j], h));
    let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let columns: Vec<Vec<f64>> = (0..dim)
        .map(|_| {
            let z = nalgebra::DVector::from_vec(normals(rng, n, 1.0));
            let x = &l * z;
            std::iter::once(0.0).chain(x.iter().copied()).collect()
        })
        .collect();
    Path::from_components(grid, &columns)
}

/// Upper bound on the standard deviation of the part of `B_tau` generated by
/// Wiener increments older than `-tail`, relative to `tau^H`.
pub fn tail_truncation_bound(h: Hurst, tau: f64, tail: f64) -> Result<f64> {
    let k = h.kappa();
    let c = mvn_normalizer(h)?;
    // ((tau + s)^k - s^k)^2 <= k^2 tau^2 s^{2k - 2} for s >= tail.
    let var = c * c * k * k * tau * tau * tail.powf(2.0 * k - 1.0) / (1.0 - 2.0 * k);
    Ok(var.sqrt() / tau.powf(h.value()))
}

/// Discretized coupling operators on a grid with step `dt`: `steps` nodes
/// inside `[0, tau]` and `tail_steps` Wiener increments before time zero.
#[derive(Debug)]
pub struct CouplingKernel {
    hurst: Hurst,
    grid: TimeGrid,
    tail_steps: usize,
    constant: f64,
    build: CausalKernel,
    recover: CausalKernel,
}

impl CouplingKernel {
    pub fn new(h: Hurst, grid: TimeGrid, tail_steps: usize) -> Result<Self> {
        h.require_long_memory()?;
        let k = h.kappa();
        let len = grid.steps() + tail_steps;
        let v = l1_increment_weights(k, grid.dt(), len);
        let u = series_reciprocal(&v, len);
        let constant = coupling_constant(h)?;
        let recover = CausalKernel::new(v[..grid.steps()].to_vec());
        Ok(CouplingKernel { hurst: h, grid, tail_steps, constant, build: CausalKernel::new(u), recover })
    }

    /// Kernel whose tail covers `tail_factor * tau`, rounded to whole steps.
    pub fn with_tail_factor(h: Hurst, grid: TimeGrid, tail_factor: f64) -> Result<Self> {
        if !(tail_factor >= 0.0 && tail_factor.is_finite()) {
            return Err(invalid(format!("tail factor must be non-negative, got {tail_factor}")));
        }
        let tail_steps = (tail_factor * grid.steps() as f64).round() as usize;
        CouplingKernel::new(h, grid, tail_steps)
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn tail_steps(&self) -> usize {
        self.tail_steps
    }

    pub fn tail_horizon(&self) -> f64 {
        self.tail_steps as f64 * self.grid.dt()
    }

    /// `K = c_H Gamma(H + 1/2)`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Build-side kernel `u` (convolution inverse of the recovery kernel).
    pub fn build_weights(&self) -> &[f64] {
        self.build.kernel()
    }
}

/// fBm path on the grid from Wiener increments: `w` is the Wiener path on
/// `[0, tau]` and `w_tail[j]` holds the `tail_steps` increments of component
/// `j` on `[-T, 0]` in time order.
pub fn build_fbm_from_w(kernel: &CouplingKernel, w: &Path, w_tail: &[Vec<f64>]) -> Result<Path> {
    check_grid(kernel, w.grid())?;
    if w_tail.len() != w.dim() || w_tail.iter().any(|t| t.len() != kernel.tail_steps) {
        return Err(Error::GridMismatch("left-tail increments do not match the kernel".into()));
    }
    let n = kernel.grid.steps();
    let signals: Vec<Vec<f64>> = (0..w.dim())
        .map(|j| {
            let mut s = w_tail[j].clone();
            s.extend(w.increments(j));
            s
        })
        .collect();
    let incs: Vec<Vec<f64>> = kernel
        .build
        .apply_many(&signals)
        .into_iter()
        .map(|c| c[kernel.tail_steps..].iter().map(|x| kernel.constant * x).collect())
        .collect();
    debug_assert!(incs.iter().all(|c| c.len() == n));
    Path::from_increments(kernel.grid, &incs)
}

/// Wiener path recovered from an fBm path on the grid (zero history before
/// time zero). Exact inverse of [`build_fbm_from_w`] with an all-zero tail.
pub fn recover_w_from_fbm(kernel: &CouplingKernel, b: &Path) -> Result<Path> {
    check_grid(kernel, b.grid())?;
    let incs: Vec<Vec<f64>> = (0..b.dim()).map(|j| b.increments(j)).collect();
    let scale = 1.0 / kernel.constant;
    let rec: Vec<Vec<f64>> =
        kernel.recover.apply_many(&incs).into_iter().map(|c| c.into_iter().map(|x| x * scale).collect()).collect();
    Path::from_increments(kernel.grid, &rec)
}

fn check_grid(kernel: &CouplingKernel, grid: TimeGrid) -> Result<()> {
    if grid.steps() != kernel.grid.steps() || (grid.dt() - kernel.grid.dt()).abs() > 1e-12 * grid.dt() {
        return Err(Error::GridMismatch("path grid differs from the coupling kernel grid".into()));
    }
    Ok(())
}

/// Which side of the coupling was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// Wiener increments sampled, fBm built from them.
    WToB,
    /// fBm sampled exactly, Wiener path recovered from it.
    BToW,
}

/// A Wiener path and the fBm path on the same probability space.
#[derive(Debug, Clone)]
pub struct CoupledDriver {
    pub mode: CouplingMode,
    pub hurst: Hurst,
    pub w_tail: Vec<Vec<f64>>,
    pub w: Path,
    pub b: Path,
}

impl CoupledDriver {
    /// Sample Wiener increments on `[-T, tau]` and build the fBm from them.
    pub fn sample_w_to_b(kernel: &CouplingKernel, dim: usize, rng: &mut ReplicaRng) -> Result<Self> {
        let grid = kernel.grid;
        let sd = grid.dt().sqrt();
        let w_tail: Vec<Vec<f64>> = (0..dim).map(|_| normals(rng, kernel.tail_steps, sd)).collect();
        let incs: Vec<Vec<f64>> = (0..dim).map(|_| normals(rng, grid.steps(), sd)).collect();
        let w = Path::from_increments(grid, &incs)?;
        let b = build_fbm_from_w(kernel, &w, &w_tail)?;
        Ok(CoupledDriver { mode: CouplingMode::WToB, hurst: kernel.hurst, w_tail, w, b })
    }

    /// Sample the fBm exactly and recover the Wiener path from it.
    pub fn sample_b_to_w(
        sampler: &CirculantSampler,
        kernel: &CouplingKernel,
        dim: usize,
        rng: &mut ReplicaRng,
    ) -> Result<Self> {
        let b = Path::from_increments(kernel.grid, &sampler.sample_increments(dim, rng))?;
        let w = recover_w_from_fbm(kernel, &b)?;
        Ok(CoupledDriver { mode: CouplingMode::BToW, hurst: kernel.hurst, w_tail: vec![Vec::new(); dim], w, b })
    }
}
