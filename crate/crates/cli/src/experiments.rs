//! Monte Carlo experiments behind the commands. Replicas run in parallel, but
//! results are collected and reduced in replica order so the output does not
//! depend on the number of worker threads.

use crate::config::{DriftName, GammaConfig, LanConfig, MleConfig, Model, SampleFbmConfig, SolveConfig};
use crate::error::CliResult;
use fraclan::fbm_core::{fbm_covariance, CirculantSampler, CoupledDriver, CouplingKernel};
use fraclan::gamma_estimator::{
    gamma_ergodic, gamma_fou_reference, gamma_stationary_quad, FouReferenceSettings, GammaEstimate, GammaMethod,
    McSettings, StationaryQuadSettings,
};
use fraclan::likelihood::{girsanov_log_density, lan_decompose, mle_scalar, GirsanovOperator, LanDecomposition};
use fraclan::rng::{derive_seed, replica_rng, ReplicaRng};
use fraclan::sde_engine::{contraction_ratios, ergodic_average, euler_solve, stationary_variance_oracle, SdeConfig};
use fraclan::stats::{ks_test_normal, median, summarize, variance_se, Summary};
use fraclan::{Hurst, Path, TimeGrid};
use rayon::prelude::*;

/// Seed tags of the sub-experiments, mixed into the master seed.
pub const TAG_GAMMA_ERGODIC: u64 = 0x6761_6d6d_615f_6572;
pub const TAG_GAMMA_QUAD: u64 = 0x6761_6d6d_615f_7171;
pub const TAG_LAN_GAMMA: u64 = 0x6c61_6e5f_6761_6d6d;

/// Run `f` for replicas `0..m` and return the results in replica order.
pub fn par_replicas<T: Send>(m: usize, f: impl Fn(u64) -> fraclan::Result<T> + Sync + Send) -> CliResult<Vec<T>> {
    Ok((0..m as u64).into_par_iter().map(f).collect::<fraclan::Result<Vec<T>>>()?)
}

fn fbm_path(sampler: &CirculantSampler, grid: TimeGrid, dim: usize, rng: &mut ReplicaRng) -> fraclan::Result<Path> {
    Path::from_increments(grid, &sampler.sample_increments(dim, rng))
}

/// One `(s, t)` cell of the covariance report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceCell {
    pub s: f64,
    pub t: f64,
    pub empirical: f64,
    pub exact: f64,
    pub se: f64,
}

impl CovarianceCell {
    /// Deviation in standard errors.
    pub fn z(&self) -> f64 {
        (self.empirical - self.exact) / self.se
    }
}

#[derive(Debug, Clone)]
pub struct FbmReport {
    pub paths: Vec<Path>,
    pub cells: Vec<CovarianceCell>,
    /// Products averaged per cell: replicas times components.
    pub samples: usize,
}

impl FbmReport {
    pub fn max_abs_z(&self) -> f64 {
        self.cells.iter().map(|c| c.z().abs()).fold(0.0, f64::max)
    }
}

/// Exact fBm samples and their empirical covariance on a `P x P` grid of
/// times `t_i = i * horizon / P`, compared with the exact covariance.
pub fn fbm_experiment(cfg: &SampleFbmConfig) -> CliResult<FbmReport> {
    let h = Hurst::new(cfg.hurst)?;
    let grid = TimeGrid::new(cfg.horizon, cfg.steps)?;
    let sampler = CirculantSampler::new(grid, h)?;
    let p = cfg.cov_points;
    let nodes: Vec<usize> = (1..=p).map(|i| (i * cfg.steps) / p).collect();
    let per_replica = par_replicas(cfg.replicas, |r| {
        let path = fbm_path(&sampler, grid, cfg.dim, &mut replica_rng(cfg.run.seed, r))?;
        let picked: Vec<Vec<f64>> = (0..cfg.dim).map(|j| nodes.iter().map(|&k| path.value(k, j)).collect()).collect();
        let keep = (r as usize) < cfg.paths_to_write;
        Ok((keep.then_some(path), picked))
    })?;
    let mut paths = Vec::new();
    let mut picked = Vec::with_capacity(cfg.replicas * cfg.dim);
    for (path, values) in per_replica {
        paths.extend(path);
        picked.extend(values);
    }
    let mut cells = Vec::with_capacity(p * p);
    for a in 0..p {
        for b in 0..p {
            let products: Vec<f64> = picked.iter().map(|v| v[a] * v[b]).collect();
            let s = summarize(&products);
            let (ts, tt) = (grid.time(nodes[a]), grid.time(nodes[b]));
            cells.push(CovarianceCell { s: ts, t: tt, empirical: s.mean, exact: fbm_covariance(ts, tt, h), se: s.se });
        }
    }
    Ok(FbmReport { paths, cells, samples: picked.len() })
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub paths: Vec<Path>,
    /// Per replica, the time average of `|Y|^2` over the observation window.
    pub second_moments: Vec<f64>,
    pub summary: Summary,
    /// Stationary `E[Y^2]` for the scalar fOU model.
    pub oracle: Option<f64>,
}

/// Euler paths over `[0, burn_in + tau]`; the last `tau` is observed.
pub fn solve_experiment(cfg: &SolveConfig) -> CliResult<SolveReport> {
    let model = cfg.model.build()?;
    let obs = TimeGrid::with_step(cfg.tau, cfg.dt)?;
    let burn = cfg.burn_in.map_or(0, |b| (b / cfg.dt).ceil() as usize);
    let n = burn + obs.steps();
    let full = TimeGrid::new(n as f64 * cfg.dt, n)?;
    let sampler = CirculantSampler::new(full, model.hurst)?;
    let dim = model.drift.dim();
    let per_replica = par_replicas(cfg.replicas, |r| {
        let b = fbm_path(&sampler, full, dim, &mut replica_rng(cfg.run.seed, r))?;
        let y = euler_solve(&model.sde, model.drift.as_ref(), &b)?.window(burn, obs.steps())?;
        let m2 = ergodic_average(&y, |x| x.iter().map(|v| v * v).sum());
        Ok((((r as usize) < cfg.paths_to_write).then_some(y), m2))
    })?;
    let mut paths = Vec::new();
    let mut second_moments = Vec::with_capacity(cfg.replicas);
    for (p, m2) in per_replica {
        paths.extend(p);
        second_moments.push(m2);
    }
    let oracle = if cfg.model.drift == DriftName::Fou && cfg.model.dim == 1 {
        Some(stationary_variance_oracle(cfg.model.theta[0], model.hurst, cfg.model.sigma[0])?)
    } else {
        None
    };
    let summary = summarize(&second_moments);
    Ok(SolveReport { paths, second_moments, summary, oracle })
}

/// Relative tolerance of the cross-method comparison.
pub const AGREEMENT_REL_TOL: f64 = 0.05;

/// Comparison of one entry between two methods.
#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub method_a: GammaMethod,
    pub method_b: GammaMethod,
    pub i: usize,
    pub j: usize,
    pub value_a: f64,
    pub value_b: f64,
    pub rel_diff: f64,
    pub combined_se: f64,
    /// `max(5% of the mean magnitude, combined standard error)`.
    pub tolerance: f64,
    pub agree: bool,
}

/// Entrywise pairwise comparison of estimates of the same `Gamma`.
pub fn gamma_agreement(estimates: &[GammaEstimate]) -> Vec<Agreement> {
    let mut out = Vec::new();
    for (x, a) in estimates.iter().enumerate() {
        for b in &estimates[x + 1..] {
            if a.q != b.q {
                continue;
            }
            for i in 0..a.q {
                for j in 0..a.q {
                    let (va, vb) = (a.get(i, j), b.get(i, j));
                    let scale = 0.5 * (va.abs() + vb.abs());
                    let diff = (va - vb).abs();
                    let combined_se = a.se(i, j).hypot(b.se(i, j));
                    let tolerance = (AGREEMENT_REL_TOL * scale).max(combined_se);
                    out.push(Agreement {
                        method_a: a.method,
                        method_b: b.method,
                        i,
                        j,
                        value_a: va,
                        value_b: vb,
                        rel_diff: if scale > 0.0 { diff / scale } else { 0.0 },
                        combined_se,
                        tolerance,
                        agree: diff <= tolerance,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GammaReport {
    pub estimates: Vec<GammaEstimate>,
    pub agreement: Vec<Agreement>,
}

/// Every applicable `Gamma` method and their agreement table. The
/// deterministic reference applies to the fOU drift with a single rate.
pub fn gamma_experiment(cfg: &GammaConfig) -> CliResult<GammaReport> {
    let model = cfg.model.build()?;
    let g = &cfg.gamma;
    let drift = model.drift.as_ref();
    let ergodic = McSettings {
        dt: g.dt,
        replicas: g.replicas,
        burn_in: g.burn_in,
        seed: derive_seed(cfg.run.seed, TAG_GAMMA_ERGODIC),
    };
    let mut estimates = vec![gamma_ergodic(drift, &model.sde, model.hurst, g.tau, &ergodic)?];
    let quad = StationaryQuadSettings {
        mc: McSettings {
            dt: g.dt,
            replicas: g.quad_replicas,
            burn_in: g.burn_in,
            seed: derive_seed(cfg.run.seed, TAG_GAMMA_QUAD),
        },
        r_max: g.r_max,
        window: g.window,
        tail_tol: g.tail_tol,
    };
    estimates.push(gamma_stationary_quad(drift, &model.sde, model.hurst, &quad)?);
    if cfg.model.drift == DriftName::Fou && cfg.model.theta.len() == 1 {
        let settings = FouReferenceSettings::default();
        let one = gamma_fou_reference(cfg.model.theta[0], model.hurst, &settings)?;
        let mut est = GammaEstimate::scalar(GammaMethod::FouReference, cfg.model.dim as f64 * one, 0.0);
        est.settings = vec![
            ("r_max_factor".into(), settings.r_max_factor.to_string()),
            ("min_lag".into(), settings.min_lag.to_string()),
            ("rel_tol".into(), settings.rel_tol.to_string()),
        ];
        estimates.push(est);
    }
    let agreement = gamma_agreement(&estimates);
    Ok(GammaReport { estimates, agreement })
}

/// Reference significance level of the KS test.
pub const KS_LEVEL: f64 = 0.01;
/// Allowed `|var - u^T Gamma u| / u^T Gamma u`.
pub const LAN_VAR_REL_TOL: f64 = 0.15;
/// Allowed `|mean + var / 2|` in standard errors.
pub const LAN_SIGNATURE_Z: f64 = 3.0;
/// Allowed relative deviation of the mean-on-variance slope from `-1/2`.
pub const LAN_SLOPE_REL_TOL: f64 = 0.1;

/// KS test of a sample against `N(ref_mean, ref_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub ref_mean: f64,
    pub ref_var: f64,
}

pub fn ks_report(samples: &[f64], ref_mean: f64, ref_var: f64) -> CliResult<KsReport> {
    let ks = ks_test_normal(samples, ref_mean, ref_var)?;
    Ok(KsReport { statistic: ks.statistic, p_value: ks.p_value, n: ks.n, ref_mean, ref_var })
}

/// Distributional summary of the log-likelihood ratios at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LanSummary {
    pub tau: f64,
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    /// `mean + var / 2`, zero under the limit law.
    pub signature: f64,
    pub signature_se: f64,
    /// `u^T Gamma_hat u`.
    pub gamma_u: f64,
    /// `None` when the reference law is degenerate (`u^T Gamma u = 0`).
    pub ks: Option<KsReport>,
    pub median_i3: f64,
    pub mean_j_over_tau: f64,
}

impl LanSummary {
    pub fn degenerate(&self) -> bool {
        self.ks.is_none()
    }

    pub fn ks_ok(&self) -> bool {
        self.ks.is_some_and(|k| k.p_value > KS_LEVEL)
    }

    pub fn signature_ok(&self) -> bool {
        self.signature.abs() <= LAN_SIGNATURE_Z * self.signature_se
    }

    pub fn variance_ok(&self) -> bool {
        self.gamma_u > 0.0 && ((self.var - self.gamma_u) / self.gamma_u).abs() <= LAN_VAR_REL_TOL
    }

    pub fn passes(&self) -> bool {
        self.ks_ok() && self.signature_ok() && self.variance_ok()
    }
}

/// Summary of the decompositions at one horizon against `N(-q/2, q)`.
pub fn lan_summary(tau: f64, rows: &[LanDecomposition], gamma_u: f64) -> CliResult<LanSummary> {
    let totals: Vec<f64> = rows.iter().map(|r| r.total).collect();
    let s = summarize(&totals);
    // Delta-method influence values of mean + var / 2.
    let psi: Vec<f64> = totals.iter().map(|x| x + 0.5 * (x - s.mean).powi(2)).collect();
    let ks = if gamma_u > 0.0 { Some(ks_report(&totals, -0.5 * gamma_u, gamma_u)?) } else { None };
    let i3: Vec<f64> = rows.iter().map(|r| r.i3).collect();
    Ok(LanSummary {
        tau,
        n: s.n,
        mean: s.mean,
        var: s.var,
        signature: s.mean + 0.5 * s.var,
        signature_se: summarize(&psi).se,
        gamma_u,
        ks,
        median_i3: median(&i3),
        mean_j_over_tau: rows.iter().map(|r| r.j_tau).sum::<f64>() / (rows.len() as f64 * tau),
    })
}

/// Least-squares slope through the origin of the mean on the variance
/// across horizons; `-1/2` under LAN.
pub fn signature_slope(summaries: &[LanSummary]) -> Option<f64> {
    let den: f64 = summaries.iter().map(|s| s.var * s.var).sum();
    (den > 0.0).then(|| summaries.iter().map(|s| s.mean * s.var).sum::<f64>() / den)
}

pub fn slope_ok(slope: Option<f64>) -> bool {
    slope.is_some_and(|b| (b + 0.5).abs() <= LAN_SLOPE_REL_TOL * 0.5)
}

/// Seed of the replicas at horizon `tau`.
pub fn lan_seed(seed: u64, tau: f64) -> u64 {
    derive_seed(seed, tau.to_bits())
}

/// Per-replica LAN decompositions at horizon `tau`. Each replica samples a
/// Wiener path with a left tail of `tail_factor * tau`, builds the fBm from
/// it and solves the SDE under `theta`.
pub fn lan_replicas(
    model: &Model,
    u: &[f64],
    tau: f64,
    dt: f64,
    replicas: usize,
    tail_factor: f64,
    seed: u64,
) -> CliResult<Vec<LanDecomposition>> {
    let grid = TimeGrid::with_step(tau, dt)?;
    let kernel = CouplingKernel::with_tail_factor(model.hurst, grid, tail_factor)?;
    let op = GirsanovOperator::new(model.hurst, grid)?;
    let drift = model.drift.as_ref();
    let sde = &model.sde;
    par_replicas(replicas, |r| {
        let drv = CoupledDriver::sample_w_to_b(&kernel, drift.dim(), &mut replica_rng(seed, r))?;
        let y = euler_solve(sde, drift, &drv.b)?;
        lan_decompose(&op, &y, &drv.w, drift, &sde.theta, u, &sde.sigma)
    })
}

#[derive(Debug, Clone)]
pub struct LanTau {
    pub rows: Vec<LanDecomposition>,
    pub summary: LanSummary,
}

#[derive(Debug, Clone)]
pub struct LanReport {
    pub gamma: GammaEstimate,
    pub per_tau: Vec<LanTau>,
    pub slope: Option<f64>,
}

/// The LAN experiment: `Gamma_hat` from the ergodic estimator, then the
/// log-likelihood ratios at every horizon and their fit to the limit law.
pub fn lan_experiment(cfg: &LanConfig) -> CliResult<LanReport> {
    let model = cfg.model.build()?;
    let g = &cfg.gamma;
    let mc = McSettings {
        dt: g.dt,
        replicas: g.replicas,
        burn_in: g.burn_in,
        seed: derive_seed(cfg.run.seed, TAG_LAN_GAMMA),
    };
    let gamma = gamma_ergodic(model.drift.as_ref(), &model.sde, model.hurst, g.tau, &mc)?;
    let gamma_u = gamma.quadratic_form(&cfg.u);
    let mut per_tau = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let seed = lan_seed(cfg.run.seed, tau);
        let rows = lan_replicas(&model, &cfg.u, tau, cfg.dt, cfg.replicas, cfg.tail_factor, seed)?;
        let summary = lan_summary(tau, &rows, gamma_u)?;
        per_tau.push(LanTau { rows, summary });
    }
    let summaries: Vec<LanSummary> = per_tau.iter().map(|t| t.summary.clone()).collect();
    Ok(LanReport { gamma, per_tau, slope: signature_slope(&summaries) })
}

#[derive(Debug, Clone)]
pub struct MleReport {
    pub theta_hats: Vec<f64>,
    /// `sqrt(tau) (theta_hat - theta)`.
    pub standardized: Vec<f64>,
    pub theta_summary: Summary,
    pub standardized_var: f64,
    pub standardized_var_se: f64,
}

impl MleReport {
    /// Sample mean of `theta_hat` within three standard errors of `theta`.
    pub fn mean_ok(&self, theta: f64) -> bool {
        (self.theta_summary.mean - theta).abs() <= 3.0 * self.theta_summary.se
    }

    /// Variance of the standardized estimates within 15% of `2 theta`.
    pub fn variance_ok(&self, theta: f64) -> bool {
        ((self.standardized_var - 2.0 * theta) / (2.0 * theta)).abs() <= 0.15
    }
}

/// The scalar fOU MLE benchmark: exact fBm, Euler path from `y0`, Wiener
/// path reconstructed from the observation and the Girsanov contrast
/// maximized per replica.
pub fn mle_experiment(cfg: &MleConfig) -> CliResult<MleReport> {
    let model = cfg.model().build()?;
    let grid = TimeGrid::with_step(cfg.tau, cfg.dt)?;
    let sampler = CirculantSampler::new(grid, model.hurst)?;
    let kernel = CouplingKernel::new(model.hurst, grid, 0)?;
    let op = GirsanovOperator::new(model.hurst, grid)?;
    let drift = model.drift.as_ref();
    let theta_hats = par_replicas(cfg.replicas, |r| {
        let b = fbm_path(&sampler, grid, 1, &mut replica_rng(cfg.run.seed, r))?;
        let y = euler_solve(&model.sde, drift, &b)?;
        Ok(mle_scalar(&op, &kernel, &y, drift, &model.sde.sigma, cfg.theta)?.theta_hat)
    })?;
    let rt = cfg.tau.sqrt();
    let standardized: Vec<f64> = theta_hats.iter().map(|t| rt * (t - cfg.theta)).collect();
    Ok(MleReport {
        theta_summary: summarize(&theta_hats),
        standardized_var: summarize(&standardized).var,
        standardized_var_se: variance_se(&standardized),
        theta_hats,
        standardized,
    })
}

/// Sample of `exp(-L)`, `L` the Girsanov exponent of the drift at `theta`,
/// on paths generated under `theta`. Its mean is one.
pub fn girsanov_unit_mean(
    model: &Model,
    tau: f64,
    dt: f64,
    replicas: usize,
    tail_factor: f64,
    seed: u64,
) -> CliResult<Vec<f64>> {
    let grid = TimeGrid::with_step(tau, dt)?;
    let kernel = CouplingKernel::with_tail_factor(model.hurst, grid, tail_factor)?;
    let op = GirsanovOperator::new(model.hurst, grid)?;
    let drift = model.drift.as_ref();
    let sde = &model.sde;
    par_replicas(replicas, |r| {
        let drv = CoupledDriver::sample_w_to_b(&kernel, drift.dim(), &mut replica_rng(seed, r))?;
        let y = euler_solve(sde, drift, &drv.b)?;
        Ok((-girsanov_log_density(&op, &y, &drv.w, drift, &sde.theta, &sde.sigma)?).exp())
    })
}

/// `(t, |X_t - Y_t| / (|x - y| e^{-alpha t}))` for two solutions from `x0`
/// and `y0` driven by one exact fBm path, `alpha` the declared
/// dissipativity constant.
pub fn contraction_experiment(
    model: &Model,
    x0: &[f64],
    y0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
) -> CliResult<Vec<(f64, f64)>> {
    let grid = TimeGrid::with_step(horizon, dt)?;
    let drift = model.drift.as_ref();
    let sampler = CirculantSampler::new(grid, model.hurst)?;
    let b = fbm_path(&sampler, grid, drift.dim(), &mut replica_rng(seed, 0))?;
    let solve = |start: &[f64]| -> CliResult<Path> {
        let cfg = SdeConfig::new(start.to_vec(), model.sde.sigma.clone(), model.sde.theta.clone())?;
        Ok(euler_solve(&cfg, drift, &b)?)
    };
    let (x, y) = (solve(x0)?, solve(y0)?);
    let alpha = drift.dissipativity(&model.sde.theta);
    let ratios = contraction_ratios(&x, &y, alpha);
    Ok(ratios.into_iter().enumerate().map(|(k, q)| (grid.time(k), q)).collect())
}
