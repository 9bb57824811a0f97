//! Sample summaries and the one-sample Kolmogorov-Smirnov test against a
//! Gaussian reference law.

use crate::error::{invalid, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Summary { n, mean, var, se: (var / n as f64).sqrt() }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard error of the unbiased sample variance, from the fourth central
/// moment: `Var(s^2) ~ (m4 - s^4 (n - 3) / (n - 1)) / n`.
pub fn variance_se(xs: &[f64]) -> f64 {
    let s = summarize(xs);
    let n = s.n as f64;
    let m4 = xs.iter().map(|x| (x - s.mean).powi(4)).sum::<f64>() / n;
    ((m4 - s.var * s.var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Result of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Minimum sample size accepted by [`ks_test_normal`].
pub const KS_MIN_SAMPLES: usize = 20;

/// One-sample KS test of `samples` against `N(mean, var)` with the asymptotic
/// Kolmogorov p-value.
pub fn ks_test_normal(samples: &[f64], mean: f64, var: f64) -> Result<KsResult> {
    if !(var > 0.0 && var.is_finite()) {
        return Err(invalid(format!("reference variance must be positive, got {var}")));
    }
    if samples.len() < KS_MIN_SAMPLES {
        return Err(invalid(format!("KS test needs at least {KS_MIN_SAMPLES} samples, got {}", samples.len())));
    }
    let normal = Normal::new(mean, var.sqrt()).map_err(|e| invalid(e.to_string()))?;
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(KsResult { statistic: d, p_value: kolmogorov_sf(d, v.len()), n: v.len() })
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < KS_MIN_SAMPLES || b.len() < KS_MIN_SAMPLES {
        return Err(invalid("KS test needs at least 20 samples per group"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(ne.sqrt() * d), n: n + m })
}

fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    kolmogorov_q(d * (n as f64).sqrt())
}

/// `P(K > lambda)` for the Kolmogorov limit law of `sqrt(n) D`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if (k as i64) % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
