//! CSV renderings of the experiment reports. All numbers use `%.17g`.

use crate::experiments::{Agreement, FbmReport, LanSummary, MleReport, SolveReport};
use fraclan::gamma_estimator::GammaEstimate;
use fraclan::io::{csv_row, fmt_g17, write_path_csv};
use fraclan::likelihood::LanDecomposition;
use fraclan::Path;
use std::f64::consts::PI;

fn table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn path_csv(path: &Path) -> String {
    let mut buf = Vec::new();
    write_path_csv(path, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn fbm_covariance_csv(r: &FbmReport) -> String {
    table("s,t,empirical,exact,se,z", r.cells.iter().map(|c| csv_row(&[c.s, c.t, c.empirical, c.exact, c.se, c.z()])))
}

pub fn second_moments_csv(r: &SolveReport) -> String {
    table("replica,second_moment", r.second_moments.iter().enumerate().map(|(i, m)| format!("{i},{}", fmt_g17(*m))))
}

pub fn solve_summary_csv(r: &SolveReport) -> String {
    let oracle = r.oracle.unwrap_or(f64::NAN);
    let rel = (r.summary.mean - oracle) / oracle;
    table(
        "n,mean,var,se,oracle,rel_error",
        [format!("{},{}", r.summary.n, csv_row(&[r.summary.mean, r.summary.var, r.summary.se, oracle, rel]))],
    )
}

pub fn gamma_csv(estimates: &[GammaEstimate]) -> String {
    let mut rows = Vec::new();
    for e in estimates {
        for i in 0..e.q {
            for j in 0..e.q {
                rows.push(format!("{},{i},{j},{}", e.method.label(), csv_row(&[e.get(i, j), e.se(i, j)])));
            }
        }
    }
    table("method,i,j,gamma_ij,se_ij", rows)
}

pub fn agreement_csv(rows: &[Agreement]) -> String {
    table(
        "method_a,method_b,i,j,value_a,value_b,rel_diff,combined_se,tolerance,agree",
        rows.iter().map(|a| {
            format!(
                "{},{},{},{},{},{}",
                a.method_a.label(),
                a.method_b.label(),
                a.i,
                a.j,
                csv_row(&[a.value_a, a.value_b, a.rel_diff, a.combined_se, a.tolerance]),
                a.agree
            )
        }),
    )
}

pub fn lan_rows_csv(rows: &[LanDecomposition]) -> String {
    table(
        "replica,tau,I1,I2,I3,I4,total,L_theta,J_tau",
        rows.iter()
            .enumerate()
            .map(|(i, d)| format!("{i},{}", csv_row(&[d.tau, d.i1, d.i2, d.i3, d.i4, d.total, d.l_theta, d.j_tau]))),
    )
}

pub fn lan_summary_csv(rows: &[LanSummary]) -> String {
    table(
        "tau,n,mean,var,mean_plus_half_var,se,gamma_u,ref_mean,ref_var,ks_statistic,ks_p_value,degenerate,median_I3,mean_J_over_tau",
        rows.iter().map(|s| {
            let (stat, p) = s.ks.map_or((f64::NAN, f64::NAN), |k| (k.statistic, k.p_value));
            format!(
                "{},{},{},{},{}",
                fmt_g17(s.tau),
                s.n,
                csv_row(&[s.mean, s.var, s.signature, s.signature_se, s.gamma_u, -0.5 * s.gamma_u, s.gamma_u, stat, p]),
                s.degenerate(),
                csv_row(&[s.median_i3, s.mean_j_over_tau])
            )
        }),
    )
}

pub fn slope_csv(slope: Option<f64>, ok: bool) -> String {
    table("slope,target,pass", [format!("{},{},{ok}", fmt_g17(slope.unwrap_or(f64::NAN)), fmt_g17(-0.5))])
}

pub fn mle_csv(r: &MleReport) -> String {
    table(
        "replica,theta_hat,standardized",
        r.theta_hats.iter().zip(&r.standardized).enumerate().map(|(i, (t, s))| format!("{i},{}", csv_row(&[*t, *s]))),
    )
}

pub fn mle_summary_csv(r: &MleReport, theta: f64) -> String {
    let s = &r.theta_summary;
    table(
        "n,theta,mean_theta_hat,se_theta_hat,var_standardized,var_standardized_se,target_var",
        [format!(
            "{},{}",
            s.n,
            csv_row(&[theta, s.mean, s.se, r.standardized_var, r.standardized_var_se, 2.0 * theta])
        )],
    )
}

/// Equal-width histogram over the sample range, with the density of
/// `N(mean, var)` at each bin center when a reference is given.
pub fn histogram_csv(samples: &[f64], bins: usize, reference: Option<(f64, f64)>) -> String {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = samples.len() as f64;
    let rows = counts.iter().enumerate().map(|(k, &c)| {
        let a = lo + k as f64 * width;
        let mid = a + 0.5 * width;
        let pdf = reference.map_or(f64::NAN, |(m, v)| (-(mid - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt());
        format!("{},{c},{}", csv_row(&[a, a + width]), csv_row(&[c as f64 / (n * width), pdf]))
    });
    table("bin_lo,bin_hi,count,density,reference_density", rows)
}

/// Script stub that plots every `hist_*.csv` in its directory.
pub const PLOT_SCRIPT: &str = r#"# Plots every hist_*.csv next to this file: bars for the empirical density,
# a line for the reference density when present.
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
for name in sorted(glob.glob(os.path.join(here, "hist_*.csv"))):
    with open(name) as f:
        rows = list(csv.DictReader(f))
    lo = [float(r["bin_lo"]) for r in rows]
    hi = [float(r["bin_hi"]) for r in rows]
    dens = [float(r["density"]) for r in rows]
    ref = [float(r["reference_density"]) for r in rows]
    mids = [(a + b) / 2 for a, b in zip(lo, hi)]
    fig, ax = plt.subplots()
    ax.bar(mids, dens, width=[b - a for a, b in zip(lo, hi)], alpha=0.5, label="empirical")
    if all(r == r for r in ref):
        ax.plot(mids, ref, color="k", label="reference")
    ax.set_title(os.path.basename(name))
    ax.legend()
    fig.savefig(name[:-4] + ".png")
    plt.close(fig)
"#;
