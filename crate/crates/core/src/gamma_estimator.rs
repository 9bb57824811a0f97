//! Three routes to the limit matrix
//! `Gamma(theta) = c^2 int int C(r1, r2) r1^{-1/2-H} r2^{-1/2-H} dr1 dr2`,
//! `c = c_kappa / K`, with `C` the stationary covariance of drift-gradient
//! increments: the ergodic mean of `J_tau / tau`, a product quadrature over
//! Monte Carlo covariance estimates, and a deterministic fOU reference.

use crate::conv::series_product;
use crate::error::{invalid, Error, Result};
use crate::fbm_core::{coupling_constant, CirculantSampler};
use crate::frac_calculus::marchaud_constant;
use crate::grid::{Hurst, Path, TimeGrid};
use crate::likelihood::{score_columns, GirsanovOperator};
use crate::quad::{checked, doubly_graded_breaks, graded_breaks, PanelRule};
use crate::rng::{replica_rng, ReplicaRng};
use crate::sde_engine::{default_burn_in, euler_solve, fou_autocovariance, DriftModel, SdeConfig};
use crate::stats::summarize;
use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::function::gamma::{gamma, gamma_ur};

/// How a [`GammaEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaMethod {
    Ergodic,
    StationaryQuad,
    FouReference,
}

impl GammaMethod {
    pub fn label(self) -> &'static str {
        match self {
            GammaMethod::Ergodic => "ergodic",
            GammaMethod::StationaryQuad => "stationary_quad",
            GammaMethod::FouReference => "fou_reference",
        }
    }
}

/// A `q x q` estimate of `Gamma(theta)` with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaEstimate {
    pub q: usize,
    /// Row-major entries.
    pub matrix: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub method: GammaMethod,
    pub settings: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl GammaEstimate {
    pub fn scalar(method: GammaMethod, value: f64, se: f64) -> Self {
        GammaEstimate {
            q: 1,
            matrix: vec![value],
            standard_errors: vec![se],
            method,
            settings: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.q + j]
    }

    pub fn se(&self, i: usize, j: usize) -> f64 {
        self.standard_errors[i * self.q + j]
    }

    /// `u^T Gamma u`.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let q = self.q;
        (0..q).map(|i| (0..q).map(|j| u[i] * self.get(i, j) * u[j]).sum::<f64>()).sum()
    }

    /// Standard error of `u^T Gamma u`, treating entries as independent.
    pub fn quadratic_form_se(&self, u: &[f64]) -> f64 {
        let q = self.q;
        (0..q)
            .flat_map(|i| (0..q).map(move |j| (i, j)))
            .map(|(i, j)| (u[i] * u[j] * self.se(i, j)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.q, self.q, &self.matrix);
        let sym = (&m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn trace(&self) -> f64 {
        (0..self.q).map(|i| self.get(i, i)).sum()
    }

    /// Symmetric within rounding and positive semidefinite up to `1e-8 trace`.
    pub fn is_psd(&self) -> bool {
        let q = self.q;
        let scale = self.matrix.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        let symmetric = (0..q).all(|i| (0..q).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= 1e-10 * scale));
        symmetric && self.min_eigenvalue() >= -1e-8 * self.trace().abs()
    }
}

/// `(c_kappa / K)^2`.
pub fn gamma_prefactor(h: Hurst) -> Result<f64> {
    let c = marchaud_constant(h.kappa()) / coupling_constant(h)?;
    Ok(c * c)
}

/// Shared simulation knobs of the Monte Carlo routes.
#[derive(Debug, Clone)]
pub struct McSettings {
    pub dt: f64,
    pub replicas: usize,
    /// Burn-in length; `None` uses `20 / alpha`.
    pub burn_in: Option<f64>,
    pub seed: u64,
}

fn burn_steps(burn: Option<f64>, drift: &dyn DriftModel, theta: &[f64], dt: f64) -> Result<usize> {
    let b = match burn {
        Some(b) => b,
        None => {
            let alpha = drift.dissipativity(theta);
            if !(alpha > 0.0) {
                return Err(invalid("drift must be dissipative for a stationary burn-in"));
            }
            default_burn_in(alpha)
        }
    };
    if !(b >= 0.0 && b.is_finite()) {
        return Err(invalid(format!("burn-in must be non-negative, got {b}")));
    }
    Ok((b / dt).ceil() as usize)
}

fn stationary_replica(
    cfg: &SdeConfig,
    drift: &dyn DriftModel,
    sampler: &CirculantSampler,
    grid: TimeGrid,
    rng: &mut ReplicaRng,
) -> Result<Path> {
    let b = Path::from_increments(grid, &sampler.sample_increments(drift.dim(), rng))?;
    euler_solve(cfg, drift, &b)
}

/// Columns `b_theta(Y) e_a` for each parameter direction `a`, indexed `[a][j][k]`.
fn gradient_columns(y: &Path, drift: &dyn DriftModel, theta: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let q = drift.n_params();
    (0..q)
        .map(|a| {
            let mut e = vec![0.0; q];
            e[a] = 1.0;
            Ok(score_columns(y, drift, theta, &e)?.0)
        })
        .collect()
}

/// Ergodic estimate: the mean over stationary replicas of the matrix
/// `J_ab / tau = tau^{-1} int <N_a, N_b> dt` with
/// `N_a = K^{-1} sigma^{-1} D^kappa (b_theta e_a)`, whose quadratic form in
/// `u` is `J_tau(u) / tau`.
///
/// Each replica is solved from `y0` over `[0, burn + tau]` on an exact fBm
/// path. The fractional derivative uses the whole solved history and, before
/// it, the pooled stationary mean of `b_theta` as the left level.
pub fn gamma_ergodic(
    drift: &dyn DriftModel,
    cfg: &SdeConfig,
    h: Hurst,
    tau: f64,
    mc: &McSettings,
) -> Result<GammaEstimate> {
    drift.validate(&cfg.theta)?;
    if mc.replicas < 2 {
        return Err(invalid("ergodic estimate needs at least two replicas"));
    }
    let window = TimeGrid::with_step(tau, mc.dt)?;
    let burn = burn_steps(mc.burn_in, drift, &cfg.theta, mc.dt)?;
    let n = window.steps();
    let total = burn + n;
    let grid = TimeGrid::new(total as f64 * mc.dt, total)?;
    let sampler = CirculantSampler::new(grid, h)?;
    let op = GirsanovOperator::new(h, grid)?;
    let (q, d) = (drift.n_params(), drift.dim());

    let columns: Vec<Vec<Vec<Vec<f64>>>> = (0..mc.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(mc.seed, r as u64);
            let y = stationary_replica(cfg, drift, &sampler, grid, &mut rng)?;
            gradient_columns(&y, drift, &cfg.theta)
        })
        .collect::<Result<_>>()?;

    // Pooled stationary mean over the windows, in replica order.
    let mut level = vec![vec![0.0; d]; q];
    for rep in &columns {
        for a in 0..q {
            for j in 0..d {
                level[a][j] += rep[a][j][burn..].iter().sum::<f64>();
            }
        }
    }
    let count = (columns.len() * (n + 1)) as f64;
    level.iter_mut().flatten().for_each(|x| *x /= count);

    let per_replica: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|rep| {
            let paths: Vec<Path> =
                (0..q).map(|a| op.transform(&rep[a], &level[a], &cfg.sigma)).collect::<Result<_>>()?;
            let mut m = vec![0.0; q * q];
            for a in 0..q {
                for b in a..q {
                    let v = window_inner(&paths[a], &paths[b], burn) / tau;
                    m[a * q + b] = v;
                    m[b * q + a] = v;
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    let mut est = reduce_replicas(&per_replica, q, GammaMethod::Ergodic);
    est.settings = vec![
        ("tau".into(), tau.to_string()),
        ("dt".into(), mc.dt.to_string()),
        ("burn_steps".into(), burn.to_string()),
        ("replicas".into(), mc.replicas.to_string()),
        ("seed".into(), mc.seed.to_string()),
    ];
    let alpha = drift.dissipativity(&cfg.theta);
    if tau * alpha < 10.0 {
        est.warnings.push(format!("tau = {tau} is short against 1/alpha = {}", 1.0 / alpha));
    }
    flag_noisy(&mut est);
    Ok(est)
}

/// Trapezoidal `int <f, g> dt` over the nodes from `start` to the end.
fn window_inner(f: &Path, g: &Path, start: usize) -> f64 {
    let n = f.grid().steps();
    let dot = |k: usize| f.row(k).iter().zip(g.row(k)).map(|(a, b)| a * b).sum::<f64>();
    let mut acc = 0.5 * (dot(start) + dot(n));
    for k in start + 1..n {
        acc += dot(k);
    }
    acc * f.grid().dt()
}

fn reduce_replicas(per_replica: &[Vec<f64>], q: usize, method: GammaMethod) -> GammaEstimate {
    let mut matrix = vec![0.0; q * q];
    let mut se = vec![0.0; q * q];
    for e in 0..q * q {
        let xs: Vec<f64> = per_replica.iter().map(|m| m[e]).collect();
        let s = summarize(&xs);
        matrix[e] = s.mean;
        se[e] = s.se;
    }
    GammaEstimate { q, matrix, standard_errors: se, method, settings: Vec::new(), warnings: Vec::new() }
}

fn flag_noisy(est: &mut GammaEstimate) {
    for i in 0..est.q {
        let (v, s) = (est.get(i, i), est.se(i, i));
        if v.abs() > 0.0 && s / v.abs() > 0.2 {
            est.warnings.push(format!("entry ({i}, {i}) has relative standard error {:.3}; add replicas", s / v.abs()));
        }
    }
}

/// Knobs of [`gamma_stationary_quad`].
#[derive(Debug, Clone)]
pub struct StationaryQuadSettings {
    pub mc: McSettings,
    /// Lag truncation `R`; the lag step is `mc.dt`.
    pub r_max: f64,
    /// Length of each stationary observation window, at least `2 R`.
    pub window: f64,
    /// Largest accepted `|a_ii(R)| / a_ii(0)`.
    pub tail_tol: f64,
}

impl StationaryQuadSettings {
    pub fn new(mc: McSettings) -> Self {
        StationaryQuadSettings { mc, r_max: 50.0, window: 200.0, tail_tol: 0.1 }
    }
}

/// Hat-function weights `omega_m = int phi_m(r) r^{-1-kappa} dr` on
/// `[0, L h]` for `m = 1..=L` (index 0 unused).
pub fn hat_weights(kappa: f64, h: f64, len: usize) -> Vec<f64> {
    let i0 = |a: f64, b: f64| (a.powf(-kappa) - b.powf(-kappa)) / kappa;
    let i1 = |a: f64, b: f64| (b.powf(1.0 - kappa) - a.powf(1.0 - kappa)) / (1.0 - kappa);
    let mut w = vec![0.0; len + 1];
    for (m, wm) in w.iter_mut().enumerate().skip(1) {
        let (a, b, c) = ((m - 1) as f64 * h, m as f64 * h, (m + 1) as f64 * h);
        let rise = if m == 1 { i1(0.0, b) / h } else { (i1(a, b) - a * i0(a, b)) / h };
        let fall = if m < len { (c * i0(b, c) - i1(b, c)) / h } else { 0.0 };
        *wm = rise + fall;
    }
    w
}

/// `int int C w w` from the stationary cross-covariance `a(x)` on lags
/// `x = -L..=L` (entry `L + x`), hat-function product weights, a power-law
/// corner cell and closed-form tails beyond `R = L h`.
fn weighted_double_integral(acov: &[f64], omega: &[f64], kappa: f64, hurst: f64, h: f64) -> f64 {
    let len = omega.len() - 1;
    let a = |x: isize| acov[(len as isize + x) as usize];
    let d = |x: isize| a(0) - a(x);
    let total_w: f64 = omega[1..].iter().sum();
    let mut q = 0.0;
    for m in 1..=len {
        q += total_w * (d(-(m as isize)) + d(m as isize)) * omega[m];
    }
    // Sum over m, n of D(m - n) omega_m omega_n by lag.
    for x in -(len as isize - 1)..=(len as isize - 1) {
        let mut lam = 0.0;
        for m in 1..=len {
            let n = m as isize - x;
            if n >= 1 && n <= len as isize {
                lam += omega[m] * omega[n as usize];
            }
        }
        q -= d(x) * lam;
    }
    // Corner cell: replace the bilinear value C(h, h) (r1 r2 / h^2) by the
    // local model k0 (r1 r2 / h^2)^H fitted on the first two diagonal shells.
    let cjj = |j: isize| d(-j) + d(j);
    let (s1, s2) = (1.0, 2f64.powf(2.0 * hurst));
    let k0 = (cjj(1) * s1 + cjj(2) * s2) / (s1 * s1 + s2 * s2);
    let e_h = h.powf(-kappa) / (hurst - kappa);
    let e_1 = h.powf(-kappa) / (1.0 - kappa);
    q += k0 * e_h * e_h - cjj(1) * e_1 * e_1;
    // Regions beyond R, where the cross-covariance has decayed.
    let r = len as f64 * h;
    let t = r.powf(-kappa) / kappa;
    for m in 1..=len {
        q += t * (d(m as isize) + d(-(m as isize))) * omega[m];
    }
    q + t * t * a(0)
}

/// Stationary product-quadrature estimate. Cross-covariances
/// `a_ab(x) = E[Z_a(0)^T S Z_b(x)]` of the centered drift gradients
/// `Z_a = b_theta e_a - mean`, `S = sigma^{-T} sigma^{-1}`, are estimated on
/// the lag grid from stationary windows. Then
/// `C_ab(r1, r2) = D_ab(-r2) + D_ab(r1) - D_ab(r1 - r2)` with
/// `D(x) = a(0) - a(x)` is integrated against the singular weight. The
/// estimator is linear in the covariances, so each replica yields its own
/// estimate and the spread gives standard errors.
pub fn gamma_stationary_quad(
    drift: &dyn DriftModel,
    cfg: &SdeConfig,
    h: Hurst,
    settings: &StationaryQuadSettings,
) -> Result<GammaEstimate> {
    drift.validate(&cfg.theta)?;
    h.require_long_memory()?;
    let mc = &settings.mc;
    if mc.replicas < 2 {
        return Err(invalid("stationary quadrature needs at least two replicas"));
    }
    let lags = (settings.r_max / mc.dt).round() as usize;
    if lags < 3 {
        return Err(invalid("lag truncation must span at least three steps"));
    }
    let window = TimeGrid::with_step(settings.window, mc.dt)?;
    let n = window.steps();
    if n < 2 * lags {
        return Err(invalid("observation window must be at least twice the lag truncation"));
    }
    let burn = burn_steps(mc.burn_in, drift, &cfg.theta, mc.dt)?;
    let total = burn + n;
    let grid = TimeGrid::new(total as f64 * mc.dt, total)?;
    let sampler = CirculantSampler::new(grid, h)?;
    let (q, d) = (drift.n_params(), drift.dim());

    // Gradient windows [a][j][k], k over the observation window.
    let windows: Vec<Vec<Vec<Vec<f64>>>> = (0..mc.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(mc.seed, r as u64);
            let y = stationary_replica(cfg, drift, &sampler, grid, &mut rng)?;
            let cols = gradient_columns(&y, drift, &cfg.theta)?;
            Ok(cols.into_iter().map(|a| a.into_iter().map(|c| c[burn..].to_vec()).collect()).collect())
        })
        .collect::<Result<_>>()?;

    let mut mean = vec![vec![0.0; d]; q];
    for rep in &windows {
        for a in 0..q {
            for j in 0..d {
                mean[a][j] += rep[a][j].iter().sum::<f64>();
            }
        }
    }
    let count = (windows.len() * (n + 1)) as f64;
    mean.iter_mut().flatten().for_each(|x| *x /= count);

    let s_matrix = {
        let inv = cfg.sigma.matrix().clone().try_inverse().ok_or_else(|| invalid("sigma is singular"))?;
        inv.transpose() * inv
    };
    let kappa = h.kappa();
    let omega = hat_weights(kappa, mc.dt, lags);
    let pref = gamma_prefactor(h)?;

    let per_replica: Vec<(Vec<f64>, Vec<f64>)> = windows
        .par_iter()
        .map(|rep| {
            let centered: Vec<Vec<Vec<f64>>> =
                (0..q).map(|a| (0..d).map(|j| rep[a][j].iter().map(|x| x - mean[a][j]).collect()).collect()).collect();
            let weighted: Vec<Vec<Vec<f64>>> = (0..q)
                .map(|b| {
                    (0..d)
                        .map(|i| (0..=n).map(|k| (0..d).map(|j| s_matrix[(i, j)] * centered[b][j][k]).sum()).collect())
                        .collect()
                })
                .collect();
            let mut m = vec![0.0; q * q];
            let mut ratios = vec![0.0; q];
            for a in 0..q {
                for b in 0..q {
                    let acov = cross_covariance(&centered[a], &weighted[b], lags);
                    if a == b {
                        ratios[a] = acov[2 * lags] / acov[lags];
                    }
                    m[a * q + b] = pref * weighted_double_integral(&acov, &omega, kappa, h.value(), mc.dt);
                }
            }
            for a in 0..q {
                for b in a + 1..q {
                    let s = 0.5 * (m[a * q + b] + m[b * q + a]);
                    m[a * q + b] = s;
                    m[b * q + a] = s;
                }
            }
            (m, ratios)
        })
        .collect();

    for a in 0..q {
        let ratio = per_replica.iter().map(|(_, r)| r[a]).sum::<f64>() / per_replica.len() as f64;
        if ratio.abs() > settings.tail_tol {
            return Err(Error::TailTolerance(format!(
                "autocovariance of gradient {a} at lag {} is {ratio:.3} of its variance",
                settings.r_max
            )));
        }
    }
    let mats: Vec<Vec<f64>> = per_replica.into_iter().map(|(m, _)| m).collect();
    let mut est = reduce_replicas(&mats, q, GammaMethod::StationaryQuad);
    est.settings = vec![
        ("r_max".into(), settings.r_max.to_string()),
        ("window".into(), settings.window.to_string()),
        ("dt".into(), mc.dt.to_string()),
        ("burn_steps".into(), burn.to_string()),
        ("replicas".into(), mc.replicas.to_string()),
        ("tail_tol".into(), settings.tail_tol.to_string()),
        ("seed".into(), mc.seed.to_string()),
    ];
    flag_noisy(&mut est);
    Ok(est)
}

/// `a(x) = mean_t sum_j x_j(t) y_j(t + x)` for `x = -L..=L`, stored at `L + x`.
fn cross_covariance(x: &[Vec<f64>], y: &[Vec<f64>], lags: usize) -> Vec<f64> {
    let n = x[0].len();
    let mut out = vec![0.0; 2 * lags + 1];
    for (xj, yj) in x.iter().zip(y) {
        let rev: Vec<f64> = xj.iter().rev().copied().collect();
        // (rev x * y)[n - 1 + s] = sum_t x_t y_{t + s}.
        let conv = series_product(&rev, yj, 2 * n - 1);
        for (i, o) in out.iter_mut().enumerate() {
            let s = i as isize - lags as isize;
            *o += conv[(n as isize - 1 + s) as usize] / (n - s.unsigned_abs()) as f64;
        }
    }
    out
}

/// Stationary autocovariance of the scalar fOU process, evaluated through
/// incomplete-gamma type special functions for speed. Agrees with the
/// quadrature [`fou_autocovariance`].
#[derive(Debug, Clone, Copy)]
struct FouCovariance {
    theta: f64,
    s: f64,
    pref: f64,
    gamma_s: f64,
}

impl FouCovariance {
    fn new(theta: f64, h: Hurst) -> Self {
        let s = 2.0 * h.value() - 1.0;
        FouCovariance { theta, s, pref: h.value() * s / (2.0 * theta) * theta.powf(-s), gamma_s: gamma(s) }
    }

    fn rho(&self, r: f64) -> f64 {
        let z = self.theta * r.abs();
        self.pref * (upper_part(self.s, z, self.gamma_s) + lower_part(self.s, z) + (-z).exp() * self.gamma_s)
    }
}

const ASYMPTOTIC_SWITCH: f64 = 40.0;

/// `e^z Gamma(s, z) = int_0^inf e^{-v} (z + v)^{s - 1} dv`.
fn upper_part(s: f64, z: f64, gamma_s: f64) -> f64 {
    if z == 0.0 {
        return gamma_s;
    }
    if z < ASYMPTOTIC_SWITCH {
        return z.exp() * gamma_s * gamma_ur(s, z);
    }
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= (s - k as f64) / z;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    z.powf(s - 1.0) * sum
}

/// `int_0^z e^{-(z - t)} t^{s - 1} dt`.
fn lower_part(s: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if z < ASYMPTOTIC_SWITCH {
        let mut pow = z.powf(s);
        let mut sum = pow / s;
        for k in 1..400 {
            pow *= z / k as f64;
            let term = pow / (s + k as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        return (-z).exp() * sum;
    }
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= (k as f64 - s) / z;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    z.powf(s - 1.0) * sum
}

/// Knobs of [`gamma_fou_reference`].
#[derive(Debug, Clone, Copy)]
pub struct FouReferenceSettings {
    /// Truncation `R = r_max_factor / theta`.
    pub r_max_factor: f64,
    /// Smallest lag resolved by the graded panels.
    pub min_lag: f64,
    pub rel_tol: f64,
}

impl Default for FouReferenceSettings {
    fn default() -> Self {
        FouReferenceSettings { r_max_factor: 1000.0, min_lag: 1e-6, rel_tol: 1e-5 }
    }
}

/// Deterministic `Gamma` of the scalar fOU drift `b = -theta x`, `sigma = 1`,
/// where `C(r1, r2) = rho(0) - rho(r1) - rho(r2) + rho(r1 - r2)`.
///
/// The square `[0, R]^2` is folded onto `r1 < r2` and integrated in
/// `x = r1 / r2`; outside it the covariance has decayed and the weight tails
/// are integrated in closed form.
pub fn gamma_fou_reference(theta: f64, h: Hurst, settings: &FouReferenceSettings) -> Result<f64> {
    h.require_long_memory()?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("fOU rate must be positive"));
    }
    let cov = FouCovariance::new(theta, h);
    let kappa = h.kappa();
    let rho0 = fou_autocovariance(theta, h, 0.0)?;
    let dfn = |x: f64| rho0 - cov.rho(x);
    let r_max = settings.r_max_factor / theta;
    let min = settings.min_lag * theta.recip().min(1.0);
    let r2_breaks = graded_breaks(0.0, r_max, min, 8);
    let x_breaks = doubly_graded_breaks(0.0, 1.0, min / r_max, 16);
    let inner = |rule: &PanelRule, r2: f64| {
        rule.composite(&x_breaks, |x| {
            let r1 = r2 * x;
            (dfn(r1) + dfn(r2) - dfn(r2 - r1)) * x.powf(-1.0 - kappa)
        })
    };
    let square = checked("fOU reference square", settings.rel_tol, |rule| {
        2.0 * rule.composite(&r2_breaks, |r2| r2.powf(-1.0 - 2.0 * kappa) * inner(rule, r2))
    })?;
    let edge = checked("fOU reference edge", settings.rel_tol, |rule| {
        rule.composite(&r2_breaks, |r| dfn(r) * r.powf(-1.0 - kappa))
    })?;
    let t = r_max.powf(-kappa) / kappa;
    Ok(gamma_prefactor(h)? * (square + 2.0 * t * edge + t * t * rho0))
}
