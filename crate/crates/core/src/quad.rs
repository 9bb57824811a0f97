//! Gauss-Legendre rules and composite quadrature on graded panels.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed Gauss-Legendre rule applied panel by panel.
#[derive(Debug, Clone)]
pub struct PanelRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl PanelRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        PanelRule { nodes, weights }
    }

    /// Integral of `f` over `[a, b]` with one panel.
    pub fn panel(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
    }

    /// Integral over consecutive panels delimited by `breaks`.
    pub fn composite(&self, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        breaks.windows(2).map(|w| self.panel(w[0], w[1], &mut f)).sum()
    }

    /// Quadrature nodes and weights over the panels delimited by `breaks`.
    pub fn points(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.nodes.len() * breaks.len());
        for w in breaks.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[0] + w[1]);
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                pts.push((mid + half * x, wt * half));
            }
        }
        pts
    }
}

/// Breakpoints of `[a, b]` refined geometrically toward `a` (ratio 1/2) down to
/// width `min_width`, followed by `uniform` equal panels.
pub fn graded_breaks(a: f64, b: f64, min_width: f64, uniform: usize) -> Vec<f64> {
    let len = b - a;
    let mut inner = Vec::new();
    let mut w = len / 2.0;
    while w > min_width {
        inner.push(a + w);
        w /= 2.0;
    }
    let mut breaks = vec![a];
    breaks.extend(inner.iter().rev());
    let start = *breaks.last().unwrap();
    let top = a + len / 2.0;
    if start < top {
        breaks.push(top);
    }
    let from = *breaks.last().unwrap();
    let m = uniform.max(1);
    for i in 1..=m {
        breaks.push(from + (b - from) * i as f64 / m as f64);
    }
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-300);
    breaks
}

/// Breakpoints of `[a, b]` graded geometrically toward both ends. The width
/// near `b` is floored at `1e-12 (b - a)` so breakpoints stay distinct in
/// floating point.
pub fn doubly_graded_breaks(a: f64, b: f64, min_width: f64, uniform: usize) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let min_width = min_width.max(1e-12 * (b - a));
    let left = graded_breaks(a, mid, min_width, uniform.div_ceil(2));
    let right: Vec<f64> =
        graded_breaks(a, mid, min_width, uniform.div_ceil(2)).iter().rev().map(|x| b - (x - a)).collect();
    let mut breaks = left;
    breaks.extend(right.into_iter().skip(1));
    breaks
}

/// Evaluate `integral` at two rule orders and return the finer value when the
/// two agree to `rel_tol`.
pub fn checked(what: &str, rel_tol: f64, mut integral: impl FnMut(&PanelRule) -> f64) -> Result<f64> {
    let coarse = integral(&PanelRule::new(10));
    let fine = integral(&PanelRule::new(16));
    let scale = fine.abs().max(1e-300);
    if !fine.is_finite() || (fine - coarse).abs() > rel_tol * scale {
        return Err(Error::QuadratureNonconvergence(format!(
            "{what}: refinement changed the value from {coarse:.12e} to {fine:.12e}"
        )));
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let r = PanelRule::new(8);
        for p in 0..16 {
            let v = r.panel(0.0, 2.0, |x| x.powi(p));
            let exact = 2f64.powi(p + 1) / (p + 1) as f64;
            assert!((v - exact).abs() < 1e-12 * exact, "degree {p}");
        }
    }

    #[test]
    fn graded_panels_handle_endpoint_singularity() {
        let r = PanelRule::new(12);
        let b = graded_breaks(0.0, 1.0, 1e-20, 4);
        let v = r.composite(&b, |x| x.powf(-0.6));
        assert!((v - 2.5).abs() < 1e-8);
        let b2 = doubly_graded_breaks(0.0, 1.0, 1e-20, 4);
        let v2 = r.composite(&b2, |x| (1.0 - x).powf(-0.3) + x.powf(0.4));
        assert!((v2 - (1.0 / 0.7 + 1.0 / 1.4)).abs() < 1e-7);
    }
}
