//! Drift models, the Euler scheme for `dY = b(Y; theta) dt + sigma dB`,
//! stationary burn-in and ergodic averages.

use crate::error::{invalid, Error, Result};
use crate::grid::{Hurst, Path};
use crate::quad::{checked, graded_breaks, PanelRule};
use crate::rng::ReplicaRng;
use nalgebra::DMatrix;
use rand::Rng;
use statrs::function::gamma::gamma;

/// Euler paths abort once `|Y|` exceeds this value.
pub const OVERFLOW_CAP: f64 = 1e8;

/// Largest accepted condition number of `sigma`.
pub const CONDITION_CAP: f64 = 1e8;

/// Parametric drift `b(x; theta)` on `R^d` with `theta in R^q`.
pub trait DriftModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;

    /// Rejects parameters outside the model's admissible set.
    fn validate(&self, theta: &[f64]) -> Result<()>;

    fn eval(&self, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// `d x q` Jacobian in `theta`, row-major.
    fn theta_jacobian(&self, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// `d x d` Jacobian in `x`, row-major.
    fn x_jacobian(&self, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// Declared `alpha` with `<b(x) - b(y), x - y> <= -alpha |x - y|^2`.
    fn dissipativity(&self, theta: &[f64]) -> f64;

    /// Whether `b` is affine in `theta`, in which case its first-order Taylor
    /// remainder in `theta` vanishes identically.
    fn affine_in_theta(&self) -> bool {
        false
    }
}

fn check_theta(model: &dyn DriftModel, theta: &[f64]) -> Result<()> {
    if theta.len() != model.n_params() {
        return Err(invalid(format!(
            "{} drift expects {} parameters, got {}",
            model.name(),
            model.n_params(),
            theta.len()
        )));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(invalid("parameters must be finite"));
    }
    Ok(())
}

/// Fractional Ornstein-Uhlenbeck drift `b(x) = -theta x`, either isotropic
/// (one parameter) or diagonal (one parameter per component).
#[derive(Debug, Clone)]
pub struct Fou {
    dim: usize,
    diagonal: bool,
}

impl Fou {
    pub fn scalar() -> Self {
        Fou { dim: 1, diagonal: false }
    }

    pub fn isotropic(dim: usize) -> Self {
        Fou { dim, diagonal: false }
    }

    pub fn diagonal(dim: usize) -> Self {
        Fou { dim, diagonal: true }
    }

    fn rate(&self, theta: &[f64], i: usize) -> f64 {
        if self.diagonal {
            theta[i]
        } else {
            theta[0]
        }
    }
}

impl DriftModel for Fou {
    fn name(&self) -> &str {
        "fou"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn n_params(&self) -> usize {
        if self.diagonal {
            self.dim
        } else {
            1
        }
    }

    fn validate(&self, theta: &[f64]) -> Result<()> {
        check_theta(self, theta)?;
        if theta.iter().any(|&t| t <= 0.0) {
            return Err(invalid("fOU rates must be positive"));
        }
        Ok(())
    }

    fn eval(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = -self.rate(theta, i) * x[i];
        }
    }

    fn theta_jacobian(&self, x: &[f64], _theta: &[f64], out: &mut [f64]) {
        let q = self.n_params();
        out.fill(0.0);
        for i in 0..self.dim {
            let col = if self.diagonal { i } else { 0 };
            out[i * q + col] = -x[i];
        }
    }

    fn x_jacobian(&self, _x: &[f64], theta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = -self.rate(theta, i);
        }
    }

    fn dissipativity(&self, theta: &[f64]) -> f64 {
        theta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn affine_in_theta(&self) -> bool {
        true
    }
}

/// Componentwise `b(x) = -theta_1 x + theta_2 tanh(x)` with
/// `theta_1 > theta_2 > 0`, dissipative with `alpha = theta_1 - theta_2`.
#[derive(Debug, Clone)]
pub struct TanhDrift {
    dim: usize,
}

impl TanhDrift {
    pub fn new(dim: usize) -> Self {
        TanhDrift { dim }
    }
}

impl DriftModel for TanhDrift {
    fn name(&self) -> &str {
        "tanh"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn n_params(&self) -> usize {
        2
    }

    fn validate(&self, theta: &[f64]) -> Result<()> {
        check_theta(self, theta)?;
        if !(theta[0] > theta[1] && theta[1] > 0.0) {
            return Err(invalid(format!("tanh drift needs theta_1 > theta_2 > 0, got ({}, {})", theta[0], theta[1])));
        }
        Ok(())
    }

    fn eval(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = -theta[0] * x[i] + theta[1] * x[i].tanh();
        }
    }

    fn theta_jacobian(&self, x: &[f64], _theta: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[2 * i] = -x[i];
            out[2 * i + 1] = x[i].tanh();
        }
    }

    fn x_jacobian(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            let c = x[i].cosh();
            out[i * self.dim + i] = -theta[0] + theta[1] / (c * c);
        }
    }

    fn dissipativity(&self, theta: &[f64]) -> f64 {
        theta[0] - theta[1]
    }

    fn affine_in_theta(&self) -> bool {
        true
    }
}

/// Constant diffusion matrix `sigma` with its inverse.
#[derive(Debug, Clone)]
pub struct Diffusion {
    sigma: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Diffusion {
    /// From a row-major `d x d` matrix; rejects singular or ill-conditioned input.
    pub fn new(dim: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != dim * dim {
            return Err(invalid(format!("sigma needs {} entries, got {}", dim * dim, row_major.len())));
        }
        let sigma = DMatrix::from_row_slice(dim, dim, row_major);
        let sv = sigma.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 0.0) || smax / smin > CONDITION_CAP {
            return Err(invalid("sigma must be invertible with moderate condition number"));
        }
        let inverse = sigma.clone().try_inverse().ok_or_else(|| invalid("sigma is singular"))?;
        Ok(Diffusion { sigma, inverse })
    }

    pub fn scalar(s: f64) -> Result<Self> {
        Diffusion::new(1, &[s])
    }

    pub fn identity(dim: usize) -> Self {
        Diffusion { sigma: DMatrix::identity(dim, dim), inverse: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.sigma[(k / d, k % d)]).collect()
    }

    /// `sigma x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.sigma, x, out)
    }

    /// `sigma^{-1} x`.
    pub fn solve(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.inverse, x, out)
    }
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let d = m.nrows();
    for i in 0..d {
        out[i] = (0..d).map(|j| m[(i, j)] * x[j]).sum();
    }
}

/// Initial condition, diffusion and parameter of one SDE.
#[derive(Debug, Clone)]
pub struct SdeConfig {
    pub y0: Vec<f64>,
    pub sigma: Diffusion,
    pub theta: Vec<f64>,
}

impl SdeConfig {
    pub fn new(y0: Vec<f64>, sigma: Diffusion, theta: Vec<f64>) -> Result<Self> {
        if y0.len() != sigma.dim() {
            return Err(invalid("initial condition and sigma dimensions differ"));
        }
        Ok(SdeConfig { y0, sigma, theta })
    }

    fn check(&self, drift: &dyn DriftModel, driver: &Path) -> Result<()> {
        drift.validate(&self.theta)?;
        if drift.dim() != self.y0.len() || driver.dim() != self.y0.len() {
            return Err(invalid("drift, driver and initial condition dimensions differ"));
        }
        Ok(())
    }
}

/// Euler scheme `Y_{k+1} = Y_k + b(Y_k) dt + sigma (B_{k+1} - B_k)`.
pub fn euler_solve(cfg: &SdeConfig, drift: &dyn DriftModel, driver: &Path) -> Result<Path> {
    cfg.check(drift, driver)?;
    euler_core(cfg, drift, driver, None)
}

/// Euler scheme driven by `B + h` for a shift path `h` with `h_0 = 0`.
pub fn euler_solve_shifted(cfg: &SdeConfig, drift: &dyn DriftModel, driver: &Path, shift: &Path) -> Result<Path> {
    cfg.check(drift, driver)?;
    if shift.grid() != driver.grid() || shift.dim() != driver.dim() {
        return Err(Error::GridMismatch("shift and driver live on different grids".into()));
    }
    if shift.row(0).iter().any(|&x| x != 0.0) {
        return Err(invalid("shift path must start at zero"));
    }
    euler_core(cfg, drift, driver, Some(shift))
}

fn euler_core(cfg: &SdeConfig, drift: &dyn DriftModel, driver: &Path, shift: Option<&Path>) -> Result<Path> {
    let grid = driver.grid();
    let d = cfg.y0.len();
    let n = grid.steps();
    let dt = grid.dt();
    let mut values = Vec::with_capacity((n + 1) * d);
    values.extend_from_slice(&cfg.y0);
    let mut b = vec![0.0; d];
    let mut db = vec![0.0; d];
    let mut noise = vec![0.0; d];
    for k in 0..n {
        let y = &values[k * d..(k + 1) * d];
        drift.eval(y, &cfg.theta, &mut b);
        for j in 0..d {
            db[j] = driver.value(k + 1, j) - driver.value(k, j);
            if let Some(h) = shift {
                db[j] += h.value(k + 1, j) - h.value(k, j);
            }
        }
        cfg.sigma.apply(&db, &mut noise);
        let mut norm2 = 0.0;
        for j in 0..d {
            let next = values[k * d + j] + b[j] * dt + noise[j];
            norm2 += next * next;
            values.push(next);
        }
        if !(norm2.sqrt() <= OVERFLOW_CAP) {
            return Err(Error::Overflow { t: grid.time(k + 1), norm: norm2.sqrt() });
        }
    }
    Path::from_values(grid, d, values)
}

/// Default burn-in `20 / alpha`.
pub fn default_burn_in(alpha: f64) -> f64 {
    20.0 / alpha
}

/// A path solved over `[0, burn_in + tau]` whose last `tau` approximates the
/// stationary solution. The full history is kept for quantities that look
/// into the past.
#[derive(Debug, Clone)]
pub struct StationaryPath {
    pub full: Path,
    pub burn_steps: usize,
}

impl StationaryPath {
    /// Restriction to the last window, re-based to start at time zero.
    pub fn window(&self) -> Path {
        let n = self.full.grid().steps();
        self.full.window(self.burn_steps, n - self.burn_steps).expect("window inside path")
    }
}

/// Solve from `y0` over the whole driver and keep the burn-in split.
pub fn stationary_path(
    cfg: &SdeConfig,
    drift: &dyn DriftModel,
    driver: &Path,
    burn_steps: usize,
) -> Result<StationaryPath> {
    if burn_steps >= driver.grid().steps() {
        return Err(invalid("burn-in covers the whole driver"));
    }
    let full = euler_solve(cfg, drift, driver)?;
    Ok(StationaryPath { full, burn_steps })
}

/// Trapezoidal time average of `f` along the path.
pub fn ergodic_average(path: &Path, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let n = path.grid().steps();
    let mut acc = 0.5 * (f(path.row(0)) + f(path.row(n)));
    for k in 1..n {
        acc += f(path.row(k));
    }
    acc / n as f64
}

/// Outcome of [`check_dissipativity`].
#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    pub estimate: f64,
    pub declared: f64,
    /// The pair attaining the minimum when it falls below `declared - tol`.
    pub violation: Option<(Vec<f64>, Vec<f64>)>,
}

/// Minimum of `-<b(x) - b(y), x - y> / |x - y|^2` over random pairs drawn
/// uniformly from the box `[lo, hi]^d`.
pub fn check_dissipativity(
    drift: &dyn DriftModel,
    theta: &[f64],
    lo: f64,
    hi: f64,
    n_pairs: usize,
    tol: f64,
    rng: &mut ReplicaRng,
) -> Result<DissipativityReport> {
    if theta.len() != drift.n_params() {
        return Err(invalid("parameter length does not match the drift"));
    }
    if !(hi > lo) || n_pairs == 0 {
        return Err(invalid("empty sampling box"));
    }
    let d = drift.dim();
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let mut best = f64::INFINITY;
    let mut worst_pair = (vec![], vec![]);
    for _ in 0..n_pairs {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi)).collect();
        drift.eval(&x, theta, &mut bx);
        drift.eval(&y, theta, &mut by);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..d {
            num += (bx[j] - by[j]) * (x[j] - y[j]);
            den += (x[j] - y[j]).powi(2);
        }
        if den == 0.0 {
            continue;
        }
        let r = -num / den;
        if r < best {
            best = r;
            worst_pair = (x, y);
        }
    }
    let declared = drift.dissipativity(theta);
    let violation = if best < declared - tol { Some(worst_pair) } else { None };
    Ok(DissipativityReport { estimate: best, declared, violation })
}

/// `|X_t - Y_t| / (|x - y| e^{-alpha t})` along two solutions sharing a driver.
pub fn contraction_ratios(x: &Path, y: &Path, alpha: f64) -> Vec<f64> {
    let d0: f64 = x.row(0).iter().zip(y.row(0)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    (0..=x.grid().steps())
        .map(|k| {
            let dk: f64 = x.row(k).iter().zip(y.row(k)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            dk / (d0 * (-alpha * x.grid().time(k)).exp())
        })
        .collect()
}

/// Stationary autocovariance `E[Y_0 Y_r]` of the scalar fOU process
/// `dY = -theta Y dt + dB`:
/// `rho(r) = H (2H - 1) / (2 theta) int e^{-theta |x|} |x - r|^{2H - 2} dx`.
pub fn fou_autocovariance(theta: f64, h: Hurst, r: f64) -> Result<f64> {
    h.require_long_memory()?;
    if !(theta > 0.0) {
        return Err(invalid("fOU rate must be positive"));
    }
    let r = r.abs();
    let s = 2.0 * h.value() - 1.0;
    let p = 1.0 / s;
    let cut = 45.0 / theta;
    let value = checked("fOU autocovariance", 1e-9, |rule: &PanelRule| {
        // x > r: closed form.
        let right = (-theta * r).exp() * gamma(s) * theta.powf(-s);
        // x < 0: substitute r + y = z^p.
        let z0 = r.powf(s);
        let z1 = (r + cut).powf(s);
        let left = rule.composite(&graded_breaks(z0, z1, 1e-14, 128), |z| p * (-theta * (z.powf(p) - r)).exp());
        // 0 < x < r: split at r / 2, substituting r - x = z^p near x = r.
        let mut mid = 0.0;
        if r > 0.0 {
            let upper = (0.5 * r).min(cut);
            mid += uniform(rule, 0.0, upper, 64, |x| (-theta * x).exp() * (r - x).powf(s - 1.0));
            if 0.5 * r < cut {
                let zmax = (0.5 * r).powf(s);
                mid += rule.composite(&graded_breaks(0.0, zmax, 1e-14, 64), |z| p * (-theta * (r - z.powf(p))).exp());
            }
        }
        right + left + mid
    })?;
    Ok(h.value() * s / (2.0 * theta) * value)
}

fn uniform(rule: &PanelRule, a: f64, b: f64, panels: usize, f: impl FnMut(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let breaks: Vec<f64> = (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
    rule.composite(&breaks, f)
}

/// Stationary variance of the scalar fOU process with diffusion `sigma`.
pub fn stationary_variance_oracle(theta: f64, h: Hurst, sigma: f64) -> Result<f64> {
    Ok(sigma * sigma * fou_autocovariance(theta, h, 0.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::rng::replica_rng;
    use approx::assert_relative_eq;

    fn scalar_cfg(y0: f64, theta: Vec<f64>) -> SdeConfig {
        SdeConfig::new(vec![y0], Diffusion::scalar(1.0).unwrap(), theta).unwrap()
    }

    /// Drift identically zero, for additivity checks.
    struct Zero;
    impl DriftModel for Zero {
        fn name(&self) -> &str {
            "zero"
        }
        fn dim(&self) -> usize {
            1
        }
        fn n_params(&self) -> usize {
            1
        }
        fn validate(&self, _: &[f64]) -> Result<()> {
            Ok(())
        }
        fn eval(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn theta_jacobian(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn x_jacobian(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn dissipativity(&self, _: &[f64]) -> f64 {
            0.0
        }
    }

    /// `b(x) = +x`, not dissipative.
    struct Expanding;
    impl DriftModel for Expanding {
        fn name(&self) -> &str {
            "expanding"
        }
        fn dim(&self) -> usize {
            1
        }
        fn n_params(&self) -> usize {
            1
        }
        fn validate(&self, _: &[f64]) -> Result<()> {
            Ok(())
        }
        fn eval(&self, x: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = x[0];
        }
        fn theta_jacobian(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn x_jacobian(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
        }
        fn dissipativity(&self, _: &[f64]) -> f64 {
            0.1
        }
    }

    #[test]
    fn zero_drift_gives_shifted_driver() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let b = crate::fbm_core::sample_fbm_exact(g, Hurst::new(0.7).unwrap(), 1, &mut replica_rng(1, 0)).unwrap();
        let y = euler_solve(&scalar_cfg(0.3, vec![0.0]), &Zero, &b).unwrap();
        for k in 0..=64 {
            assert!((y.value(k, 0) - 0.3 - b.value(k, 0)).abs() < 1e-14);
        }
        let h = Path::from_components(g, &[g.times().iter().map(|t| t.sin()).collect()]).unwrap();
        let ys = euler_solve_shifted(&scalar_cfg(0.3, vec![0.0]), &Zero, &b, &h).unwrap();
        for k in 0..=64 {
            assert!((ys.value(k, 0) - y.value(k, 0) - h.value(k, 0)).abs() < 1e-14);
        }
        let zero = Path::zeros(g, 1);
        assert_eq!(euler_solve_shifted(&scalar_cfg(0.3, vec![0.0]), &Zero, &b, &zero).unwrap(), y);
    }

    #[test]
    fn deterministic_fou_matches_ode() {
        let g = TimeGrid::with_step(1.0, 1.0 / 1024.0).unwrap();
        let zero = Path::zeros(g, 1);
        let y = euler_solve(&scalar_cfg(1.0, vec![1.0]), &Fou::scalar(), &zero).unwrap();
        assert!((y.value(1024, 0) - (-1.0f64).exp()).abs() <= 1e-3);
        let ramp = Path::from_components(g, &[g.times()]).unwrap();
        let ys = euler_solve_shifted(&scalar_cfg(0.0, vec![1.0]), &Fou::scalar(), &zero, &ramp).unwrap();
        assert!((ys.value(1024, 0) - (1.0 - (-1.0f64).exp())).abs() <= 1e-3);
    }

    #[test]
    fn overflow_is_reported() {
        let g = TimeGrid::new(100.0, 100).unwrap();
        let zero = Path::zeros(g, 1);
        let err = euler_solve(&scalar_cfg(1.0, vec![1.0]), &Expanding, &zero).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }

    #[test]
    fn drift_parameters_are_validated() {
        assert!(TanhDrift::new(1).validate(&[1.0, 2.0]).is_err());
        assert!(TanhDrift::new(1).validate(&[2.0, 1.0]).is_ok());
        assert!(Fou::scalar().validate(&[-1.0]).is_err());
        assert!(Fou::scalar().validate(&[1.0, 2.0]).is_err());
        assert!(Diffusion::new(2, &[1.0, 2.0, 2.0, 4.0]).is_err());
        assert!(Diffusion::scalar(0.0).is_err());
    }

    #[test]
    fn dissipativity_estimates() {
        let mut rng = replica_rng(5, 0);
        let fou = check_dissipativity(&Fou::scalar(), &[1.3], -5.0, 5.0, 2000, 1e-9, &mut rng).unwrap();
        assert_relative_eq!(fou.estimate, 1.3, max_relative = 1e-12);
        assert!(fou.violation.is_none());
        let tanh = check_dissipativity(&TanhDrift::new(2), &[2.0, 1.0], -5.0, 5.0, 5000, 1e-9, &mut rng).unwrap();
        assert!(tanh.estimate >= 1.0 - 1e-12);
        assert!(tanh.violation.is_none());
        let bad = check_dissipativity(&Expanding, &[0.0], -1.0, 1.0, 100, 1e-9, &mut rng).unwrap();
        assert!(bad.violation.is_some());
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let models: Vec<(Box<dyn DriftModel>, Vec<f64>)> =
            vec![(Box::new(Fou::diagonal(2)), vec![0.7, 1.9]), (Box::new(TanhDrift::new(2)), vec![2.0, 1.0])];
        let x = [0.4, -1.3];
        for (m, theta) in &models {
            let (d, q) = (m.dim(), m.n_params());
            let mut jt = vec![0.0; d * q];
            let mut jx = vec![0.0; d * d];
            m.theta_jacobian(&x, theta, &mut jt);
            m.x_jacobian(&x, theta, &mut jx);
            let eps = 1e-6;
            let (mut bp, mut bm) = (vec![0.0; d], vec![0.0; d]);
            for a in 0..q {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[a] += eps;
                tm[a] -= eps;
                m.eval(&x, &tp, &mut bp);
                m.eval(&x, &tm, &mut bm);
                for i in 0..d {
                    assert!(((bp[i] - bm[i]) / (2.0 * eps) - jt[i * q + a]).abs() < 1e-7);
                }
            }
            for a in 0..d {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += eps;
                xm[a] -= eps;
                m.eval(&xp, theta, &mut bp);
                m.eval(&xm, theta, &mut bm);
                for i in 0..d {
                    assert!(((bp[i] - bm[i]) / (2.0 * eps) - jx[i * d + a]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn ergodic_average_of_constant() {
        let g = TimeGrid::new(3.0, 30).unwrap();
        let p = Path::zeros(g, 2);
        assert_eq!(ergodic_average(&p, |_| 1.0), 1.0);
    }

    #[test]
    fn fou_stationary_variance_has_closed_form() {
        // rho(0) = H Gamma(2H) theta^{-2H}.
        for &(theta, hh) in &[(1.0, 0.7), (0.5, 0.6), (2.0, 0.85)] {
            let h = Hurst::new(hh).unwrap();
            let v = stationary_variance_oracle(theta, h, 1.0).unwrap();
            assert_relative_eq!(v, hh * gamma(2.0 * hh) * theta.powf(-2.0 * hh), max_relative = 1e-9);
        }
        let h = Hurst::new(0.7).unwrap();
        assert_relative_eq!(
            stationary_variance_oracle(1.0, h, 2.0).unwrap(),
            4.0 * 0.7 * gamma(1.4),
            max_relative = 1e-9
        );
    }

    #[test]
    fn fou_autocovariance_matches_series_and_asymptotics() {
        // Independent evaluation for moderate r: the x > r and x < 0 parts via
        // the regularized upper incomplete gamma function, the 0 < x < r part
        // by its power series.
        let (theta, hh) = (1.0, 0.7);
        let h = Hurst::new(hh).unwrap();
        let s = 2.0 * hh - 1.0;
        for &r in &[0.1, 0.5, 1.0, 3.0] {
            let upper = statrs::function::gamma::gamma_ur(s, theta * r) * gamma(s);
            let a = (theta * r).exp() * theta.powf(-s) * upper;
            let c = (-theta * r).exp() * gamma(s) * theta.powf(-s);
            let mut series = 0.0;
            let mut fact = 1.0;
            for k in 0..80 {
                if k > 0 {
                    fact *= k as f64;
                }
                series += theta.powi(k) * r.powf(s + k as f64) / (fact * (s + k as f64));
            }
            let b = (-theta * r).exp() * series;
            let expect = hh * s / (2.0 * theta) * (a + b + c);
            assert_relative_eq!(fou_autocovariance(theta, h, r).unwrap(), expect, max_relative = 1e-8);
        }
        // Long-memory decay rho(r) ~ H (2H - 1) theta^{-2} r^{2H - 2}.
        let r: f64 = 400.0;
        let asym = hh * s / (theta * theta) * r.powf(2.0 * hh - 2.0);
        assert_relative_eq!(fou_autocovariance(theta, h, r).unwrap(), asym, max_relative = 1e-3);
    }
}
