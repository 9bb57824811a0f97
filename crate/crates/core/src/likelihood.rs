//! Girsanov log-density, log-likelihood ratio, its four-term LAN
//! decomposition, the quadratic functional `J_tau`, and the scalar maximum
//! likelihood contrast.
//!
//! The fractional drift process is `g_t = K^{-1} sigma^{-1} [D^kappa b(Y; theta)]_t`
//! with `kappa = H - 1/2`, the L1 Marchaud scheme, and the constant left
//! extension `b(y0; theta)`. Stochastic integrals use left-point sums, which
//! keeps the discrete density an exact exponential martingale.

use crate::error::{invalid, Error, Result};
use crate::fbm_core::{coupling_constant, recover_w_from_fbm, CouplingKernel};
use crate::frac_calculus::{AlphaOrder, MarchaudOperator};
use crate::grid::{Hurst, Path, TimeGrid};
use crate::sde_engine::{Diffusion, DriftModel};

/// Marchaud operator of order `H - 1/2` together with `K^{-1}`, built once
/// per grid and shared by every replica.
#[derive(Debug)]
pub struct GirsanovOperator {
    hurst: Hurst,
    grid: TimeGrid,
    op: MarchaudOperator,
    inv_k: f64,
}

impl GirsanovOperator {
    pub fn new(h: Hurst, grid: TimeGrid) -> Result<Self> {
        h.require_long_memory()?;
        let op = MarchaudOperator::new(AlphaOrder::new(h.kappa())?, grid);
        Ok(GirsanovOperator { hurst: h, grid, op, inv_k: 1.0 / coupling_constant(h)? })
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// `K^{-1} sigma^{-1} D^kappa f` for `f` given componentwise with left
    /// levels `lefts`.
    pub fn transform(&self, columns: &[Vec<f64>], lefts: &[f64], sigma: &Diffusion) -> Result<Path> {
        let d = columns.len();
        if d != sigma.dim() || lefts.len() != d {
            return Err(invalid("component count differs from sigma"));
        }
        let n = columns[0].len();
        let derivs = self.op.apply_many(columns, lefts);
        let mut values = Vec::with_capacity(n * d);
        let mut x = vec![0.0; d];
        let mut out = vec![0.0; d];
        for k in 0..n {
            for j in 0..d {
                x[j] = derivs[j][k] * self.inv_k;
            }
            sigma.solve(&x, &mut out);
            values.extend_from_slice(&out);
        }
        let grid =
            if n == self.grid.steps() + 1 { self.grid } else { TimeGrid::new((n - 1) as f64 * self.grid.dt(), n - 1)? };
        Path::from_values(grid, d, values)
    }

    fn check_path(&self, y: &Path) -> Result<()> {
        if y.grid() != self.grid {
            return Err(Error::GridMismatch("path grid differs from the operator grid".into()));
        }
        Ok(())
    }

    /// `g_t(theta)` along the observed path.
    pub fn drift_process(&self, y: &Path, drift: &dyn DriftModel, theta: &[f64], sigma: &Diffusion) -> Result<Path> {
        self.check_path(y)?;
        let (cols, left) = drift_columns(y, drift, theta);
        self.transform(&cols, &left, sigma)
    }

    /// `g(theta') - g(theta)`, transformed from the drift difference.
    pub fn drift_difference(
        &self,
        y: &Path,
        drift: &dyn DriftModel,
        theta: &[f64],
        theta_prime: &[f64],
        sigma: &Diffusion,
    ) -> Result<Path> {
        self.check_path(y)?;
        let (a, la) = drift_columns(y, drift, theta_prime);
        let (b, lb) = drift_columns(y, drift, theta);
        let cols: Vec<Vec<f64>> =
            a.iter().zip(&b).map(|(p, q)| p.iter().zip(q).map(|(x, z)| x - z).collect()).collect();
        let lefts: Vec<f64> = la.iter().zip(&lb).map(|(x, z)| x - z).collect();
        self.transform(&cols, &lefts, sigma)
    }

    /// `K^{-1} sigma^{-1} D^kappa (b_theta(Y) u)`, the score direction.
    pub fn score_process(
        &self,
        y: &Path,
        drift: &dyn DriftModel,
        theta: &[f64],
        u: &[f64],
        sigma: &Diffusion,
    ) -> Result<Path> {
        self.check_path(y)?;
        let (cols, left) = score_columns(y, drift, theta, u)?;
        self.transform(&cols, &left, sigma)
    }
}

/// Componentwise `b(Y_k; theta)` and its left level `b(Y_0; theta)`.
pub fn drift_columns(y: &Path, drift: &dyn DriftModel, theta: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = y.dim();
    let n = y.grid().steps();
    let mut cols = vec![Vec::with_capacity(n + 1); d];
    let mut b = vec![0.0; d];
    for k in 0..=n {
        drift.eval(y.row(k), theta, &mut b);
        for j in 0..d {
            cols[j].push(b[j]);
        }
    }
    let left = cols.iter().map(|c| c[0]).collect();
    (cols, left)
}

/// Componentwise `b_theta(Y_k; theta) u` and its left level.
pub fn score_columns(y: &Path, drift: &dyn DriftModel, theta: &[f64], u: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let q = drift.n_params();
    if u.len() != q {
        return Err(invalid(format!("direction u needs {q} entries, got {}", u.len())));
    }
    let d = y.dim();
    let n = y.grid().steps();
    let mut cols = vec![Vec::with_capacity(n + 1); d];
    let mut jac = vec![0.0; d * q];
    for k in 0..=n {
        drift.theta_jacobian(y.row(k), theta, &mut jac);
        for j in 0..d {
            cols[j].push((0..q).map(|a| jac[j * q + a] * u[a]).sum());
        }
    }
    let left = cols.iter().map(|c| c[0]).collect();
    Ok((cols, left))
}

fn check_pair(f: &Path, w: &Path) -> Result<()> {
    if f.grid() != w.grid() || f.dim() != w.dim() {
        return Err(Error::GridMismatch("integrand and Wiener path live on different grids".into()));
    }
    Ok(())
}

/// Left-point stochastic integral `sum_k <f_k, W_{k+1} - W_k>`.
pub fn ito_integral(f: &Path, w: &Path) -> Result<f64> {
    check_pair(f, w)?;
    let n = f.grid().steps();
    let mut acc = 0.0;
    for k in 0..n {
        let (a, b0, b1) = (f.row(k), w.row(k), w.row(k + 1));
        for j in 0..f.dim() {
            acc += a[j] * (b1[j] - b0[j]);
        }
    }
    Ok(acc)
}

/// Left-point `sum_k <f_k, g_k> dt`.
pub fn left_inner(f: &Path, g: &Path) -> f64 {
    let n = f.grid().steps();
    let dt = f.grid().dt();
    let mut acc = 0.0;
    for k in 0..n {
        acc += f.row(k).iter().zip(g.row(k)).map(|(a, b)| a * b).sum::<f64>();
    }
    acc * dt
}

/// Trapezoidal `int |f_t|^2 dt`.
pub fn trapezoid_sq(f: &Path) -> f64 {
    let n = f.grid().steps();
    let sq = |k: usize| f.row(k).iter().map(|x| x * x).sum::<f64>();
    let mut acc = 0.5 * (sq(0) + sq(n));
    for k in 1..n {
        acc += sq(k);
    }
    acc * f.grid().dt()
}

/// Girsanov exponent `L = int <g, dW> + 1/2 int |g|^2 dt`; `e^{-L}` has unit
/// mean under the law that produced `y`.
pub fn girsanov_log_density(
    op: &GirsanovOperator,
    y: &Path,
    w: &Path,
    drift: &dyn DriftModel,
    theta: &[f64],
    sigma: &Diffusion,
) -> Result<f64> {
    let g = op.drift_process(y, drift, theta, sigma)?;
    Ok(ito_integral(&g, w)? + 0.5 * left_inner(&g, &g))
}

/// `log dP_{theta'} / dP_theta` on a path generated under `theta` by the
/// Wiener path `w`: `int <dg, dW> - 1/2 int |dg|^2 dt` with
/// `dg = g(theta') - g(theta)`.
pub fn log_likelihood_ratio(
    op: &GirsanovOperator,
    y: &Path,
    w: &Path,
    drift: &dyn DriftModel,
    theta: &[f64],
    theta_prime: &[f64],
    sigma: &Diffusion,
) -> Result<f64> {
    let dg = op.drift_difference(y, drift, theta, theta_prime, sigma)?;
    Ok(ito_integral(&dg, w)? - 0.5 * left_inner(&dg, &dg))
}

/// Terms of `log dP_{theta + u / sqrt(tau)} / dP_theta = I1 + I2 - I3 / 2 - I4`.
///
/// With `s = K^{-1} sigma^{-1} D^kappa (b_theta u)` and the remainder
/// `R = dg - s / sqrt(tau)`:
/// `I1 = tau^{-1/2} int <s, dW> - (2 tau)^{-1} int |s|^2`,
/// `I2 = int <R, dW>`, `I3 = int |R|^2`, `I4 = tau^{-1/2} int <R, s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LanDecomposition {
    pub tau: f64,
    pub u: Vec<f64>,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub total: f64,
    /// Girsanov exponent at `theta`.
    pub l_theta: f64,
    pub j_tau: f64,
}

/// LAN decomposition at `theta_tau = theta + u / sqrt(tau)`, `tau` the
/// horizon of `y`. For drifts affine in `theta` the remainder is zero.
pub fn lan_decompose(
    op: &GirsanovOperator,
    y: &Path,
    w: &Path,
    drift: &dyn DriftModel,
    theta: &[f64],
    u: &[f64],
    sigma: &Diffusion,
) -> Result<LanDecomposition> {
    let tau = y.grid().horizon();
    let rt = tau.sqrt();
    let s = op.score_process(y, drift, theta, u, sigma)?;
    let g = op.drift_process(y, drift, theta, sigma)?;
    let l_theta = ito_integral(&g, w)? + 0.5 * left_inner(&g, &g);
    let i1 = ito_integral(&s, w)? / rt - 0.5 * left_inner(&s, &s) / tau;
    let (i2, i3, i4) = if drift.affine_in_theta() {
        (0.0, 0.0, 0.0)
    } else {
        let theta_tau: Vec<f64> = theta.iter().zip(u).map(|(t, v)| t + v / rt).collect();
        let dg = op.drift_difference(y, drift, theta, &theta_tau, sigma)?;
        let r_values: Vec<f64> = dg.values().iter().zip(s.values()).map(|(a, b)| a - b / rt).collect();
        let r = Path::from_values(y.grid(), y.dim(), r_values)?;
        (ito_integral(&r, w)?, left_inner(&r, &r), left_inner(&r, &s) / rt)
    };
    Ok(LanDecomposition {
        tau,
        u: u.to_vec(),
        i1,
        i2,
        i3,
        i4,
        total: i1 + i2 - 0.5 * i3 - i4,
        l_theta,
        j_tau: trapezoid_sq(&s),
    })
}

/// `J_tau = int_0^tau |K^{-1} sigma^{-1} N_t|^2 dt` where `N = D^kappa (b_theta u)`
/// is the near-field L1 sum plus the closed-form tail.
pub fn j_tau(
    op: &GirsanovOperator,
    y: &Path,
    drift: &dyn DriftModel,
    theta: &[f64],
    u: &[f64],
    sigma: &Diffusion,
) -> Result<f64> {
    Ok(trapezoid_sq(&op.score_process(y, drift, theta, u, sigma)?))
}

/// Wiener path reconstructed from the observation alone,
/// `W_hat = recover(sigma^{-1} (Y - y0))`. It does not depend on `theta`.
pub fn reconstruct_w(kernel: &CouplingKernel, y: &Path, sigma: &Diffusion) -> Result<Path> {
    let d = y.dim();
    let y0 = y.row(0).to_vec();
    let mut values = Vec::with_capacity(y.values().len());
    let mut x = vec![0.0; d];
    let mut out = vec![0.0; d];
    for k in 0..=y.grid().steps() {
        for j in 0..d {
            x[j] = y.value(k, j) - y0[j];
        }
        sigma.solve(&x, &mut out);
        values.extend_from_slice(&out);
    }
    recover_w_from_fbm(kernel, &Path::from_values(y.grid(), d, values)?)
}

/// Girsanov contrast `l(theta) = int <g_theta, dW_hat> - 1/2 int |g_theta|^2 dt`.
pub fn mle_contrast(
    op: &GirsanovOperator,
    y: &Path,
    w_hat: &Path,
    drift: &dyn DriftModel,
    theta: &[f64],
    sigma: &Diffusion,
) -> Result<f64> {
    let g = op.drift_process(y, drift, theta, sigma)?;
    Ok(ito_integral(&g, w_hat)? - 0.5 * left_inner(&g, &g))
}

/// Number of log-spaced points in the bracket pre-scan.
pub const MLE_SCAN_POINTS: usize = 16;

/// Maximizer of a scalar contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleResult {
    pub theta_hat: f64,
    pub contrast: f64,
}

/// Maximize a one-parameter contrast over `[lo, hi]`: a log-spaced pre-scan
/// locates the best interior grid point, then golden-section search refines
/// it. Fails when the scan maximum sits on the bracket edge.
pub fn maximize_scalar(lo: f64, hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<MleResult> {
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("bad bracket [{lo}, {hi}]")));
    }
    let m = MLE_SCAN_POINTS;
    let grid: Vec<f64> = (0..m).map(|i| lo * (hi / lo).powf(i as f64 / (m - 1) as f64)).collect();
    let mut vals = Vec::with_capacity(m);
    for &x in &grid {
        vals.push(f(x)?);
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("contrast is not finite on the bracket".into()));
    }
    let best = (0..m).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    if best == 0 || best == m - 1 {
        return Err(Error::BracketFailure(format!(
            "contrast maximum at the bracket edge {} of [{lo}, {hi}]",
            grid[best]
        )));
    }
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a) > 1e-10 * (a.abs() + b.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let theta_hat = 0.5 * (a + b);
    Ok(MleResult { theta_hat, contrast: f(theta_hat)? })
}

/// Maximum likelihood estimate for a one-parameter drift from the observed
/// path alone, searched over `[theta_ref / 10, 10 theta_ref]`.
pub fn mle_scalar(
    op: &GirsanovOperator,
    kernel: &CouplingKernel,
    y: &Path,
    drift: &dyn DriftModel,
    sigma: &Diffusion,
    theta_ref: f64,
) -> Result<MleResult> {
    if drift.n_params() != 1 {
        return Err(invalid("scalar MLE needs a one-parameter drift"));
    }
    let w_hat = reconstruct_w(kernel, y, sigma)?;
    if w_hat.values().iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("observed path carries no noise".into()));
    }
    maximize_scalar(theta_ref / 10.0, theta_ref * 10.0, |t| mle_contrast(op, y, &w_hat, drift, &[t], sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm_core::CoupledDriver;
    use crate::rng::replica_rng;
    use crate::sde_engine::{euler_solve, Fou, SdeConfig, TanhDrift};
    use approx::assert_relative_eq;

    fn setup(tau: f64, steps: usize) -> (GirsanovOperator, CouplingKernel) {
        let h = Hurst::new(0.7).unwrap();
        let g = TimeGrid::new(tau, steps).unwrap();
        (GirsanovOperator::new(h, g).unwrap(), CouplingKernel::new(h, g, 4 * steps).unwrap())
    }

    fn simulate(kernel: &CouplingKernel, drift: &dyn DriftModel, theta: &[f64], seed: u64) -> (Path, Path) {
        let d = drift.dim();
        let drv = CoupledDriver::sample_w_to_b(kernel, d, &mut replica_rng(seed, 0)).unwrap();
        let cfg = SdeConfig::new(vec![0.0; d], Diffusion::identity(d), theta.to_vec()).unwrap();
        (euler_solve(&cfg, drift, &drv.b).unwrap(), drv.w)
    }

    #[test]
    fn ito_integral_of_constant_telescopes() {
        let (op, kernel) = setup(2.0, 64);
        let drv = CoupledDriver::sample_w_to_b(&kernel, 2, &mut replica_rng(3, 0)).unwrap();
        let c = Path::from_components(op.grid(), &[vec![1.5; 65], vec![-0.5; 65]]).unwrap();
        let got = ito_integral(&c, &drv.w).unwrap();
        let expect = 1.5 * drv.w.value(64, 0) - 0.5 * drv.w.value(64, 1);
        assert!((got - expect).abs() < 1e-12);
        assert_eq!(ito_integral(&Path::zeros(op.grid(), 2), &drv.w).unwrap(), 0.0);
    }

    #[test]
    fn drift_process_is_linear_in_fou_rate() {
        let (op, kernel) = setup(4.0, 128);
        let (y, _) = simulate(&kernel, &Fou::scalar(), &[1.0], 7);
        let s = Diffusion::identity(1);
        let g1 = op.drift_process(&y, &Fou::scalar(), &[1.0], &s).unwrap();
        let g3 = op.drift_process(&y, &Fou::scalar(), &[3.0], &s).unwrap();
        for (a, b) in g1.values().iter().zip(g3.values()) {
            assert!((3.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert_eq!(g1.value(0, 0), 0.0);
        let frozen = Path::zeros(op.grid(), 1);
        let gz = op.drift_process(&frozen, &Fou::scalar(), &[1.0], &s).unwrap();
        assert!(gz.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lan_terms_for_affine_drift() {
        let (op, kernel) = setup(8.0, 256);
        let s = Diffusion::identity(1);
        let (y, w) = simulate(&kernel, &Fou::scalar(), &[1.0], 9);
        let lan = lan_decompose(&op, &y, &w, &Fou::scalar(), &[1.0], &[1.0], &s).unwrap();
        assert_eq!((lan.i2, lan.i3, lan.i4), (0.0, 0.0, 0.0));
        assert_eq!(lan.total, lan.i1);
        let theta_tau = 1.0 + 1.0 / 8f64.sqrt();
        let llr = log_likelihood_ratio(&op, &y, &w, &Fou::scalar(), &[1.0], &[theta_tau], &s).unwrap();
        assert_relative_eq!(llr, lan.total, max_relative = 1e-10);
        let zero = lan_decompose(&op, &y, &w, &Fou::scalar(), &[1.0], &[0.0], &s).unwrap();
        assert_eq!(zero.total, 0.0);
        assert_eq!(zero.j_tau, 0.0);
        assert_eq!(log_likelihood_ratio(&op, &y, &w, &Fou::scalar(), &[1.0], &[1.0], &s).unwrap(), 0.0);
    }

    #[test]
    fn tanh_decomposition_matches_direct_ratio() {
        let (op, kernel) = setup(8.0, 256);
        let s = Diffusion::identity(2);
        let drift = TanhDrift::new(2);
        let (y, w) = simulate(&kernel, &drift, &[2.0, 1.0], 4);
        let lan = lan_decompose(&op, &y, &w, &drift, &[2.0, 1.0], &[1.0, 0.5], &s).unwrap();
        let rt = 8f64.sqrt();
        let tt = [2.0 + 1.0 / rt, 1.0 + 0.5 / rt];
        let llr = log_likelihood_ratio(&op, &y, &w, &drift, &[2.0, 1.0], &tt, &s).unwrap();
        assert_relative_eq!(llr, lan.total, max_relative = 1e-10);
        assert!(lan.j_tau > 0.0);
    }

    #[test]
    fn fou_mle_is_an_ar1_regression() {
        let (op, kernel) = setup(50.0, 800);
        let s = Diffusion::identity(1);
        let (y, _) = simulate(&kernel, &Fou::scalar(), &[1.0], 12);
        let mle = mle_scalar(&op, &CouplingKernel::new(op.hurst(), op.grid(), 0).unwrap(), &y, &Fou::scalar(), &s, 1.0)
            .unwrap();
        // The contrast is theta A - theta^2 B / 2 with A = int <g_1, dW_hat>,
        // B = int |g_1|^2, maximized at A / B.
        let w_hat = reconstruct_w(&CouplingKernel::new(op.hurst(), op.grid(), 0).unwrap(), &y, &s).unwrap();
        let g1 = op.drift_process(&y, &Fou::scalar(), &[1.0], &s).unwrap();
        let closed = ito_integral(&g1, &w_hat).unwrap() / left_inner(&g1, &g1);
        assert_relative_eq!(mle.theta_hat, closed, max_relative = 1e-6);
        assert!(mle.theta_hat > 0.3 && mle.theta_hat < 3.0);
    }

    #[test]
    fn bracket_failure_is_reported() {
        let err = maximize_scalar(0.1, 10.0, Ok).unwrap_err();
        assert!(matches!(err, Error::BracketFailure(_)));
        let ok = maximize_scalar(0.1, 10.0, |t| Ok(-(t - 2.0).powi(2))).unwrap();
        assert!((ok.theta_hat - 2.0).abs() < 1e-8);
    }
}
