//! Numerical fractional calculus on uniform grids: the Marchaud derivative
//! with constant left extension, Riemann-Liouville integrals on finite
//! intervals, and the closed-form tail of the Marchaud integral.
//!
//! All schemes are product integration rules that are exact for piecewise
//! linear data, so the operators are linear at the discrete level.

use crate::conv::CausalKernel;
use crate::error::{invalid, Result};
use crate::grid::TimeGrid;
use statrs::function::gamma::gamma;

/// Fractional order in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaOrder(f64);

impl AlphaOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("fractional order must lie in (0, 1), got {alpha}")));
        }
        Ok(AlphaOrder(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// One scalar component sampled on a grid, with the constant value it takes
/// for `t <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub left_extension: f64,
}

impl SampledFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>, left_extension: f64) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(crate::Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.steps() + 1,
                values.len()
            )));
        }
        Ok(SampledFunction { grid, values, left_extension })
    }

    /// Samples of `f` at the grid nodes, extended by `f(0)` to the left.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = grid.times().into_iter().map(f).collect();
        let left_extension = values[0];
        SampledFunction { grid, values, left_extension }
    }
}

/// Marchaud normalization `c_a = a / Gamma(1 - a)`.
pub fn marchaud_constant(alpha: f64) -> f64 {
    alpha / gamma(1.0 - alpha)
}

/// Weights `w_i` of the L1 scheme: for piecewise linear `f` with `f = f(0)` on
/// the left, `D^a f(t_k) = sum_{i<k} w_i (f_{k-i} - f_{k-1-i})`.
pub fn l1_weights(alpha: f64, dt: f64, len: usize) -> Vec<f64> {
    let scale = dt.powf(-alpha) / gamma(2.0 - alpha);
    let e = 1.0 - alpha;
    (0..len)
        .map(|i| {
            let i = i as f64;
            scale * ((i + 1.0).powf(e) - i.powf(e))
        })
        .collect()
}

/// Increment form `v_i = w_i - w_{i-1}` of the L1 weights: the increments of
/// `D^a f` are `v * df` (causal convolution).
pub fn l1_increment_weights(alpha: f64, dt: f64, len: usize) -> Vec<f64> {
    let w = l1_weights(alpha, dt, len);
    let mut v = w.clone();
    for i in 1..len {
        v[i] = w[i] - w[i - 1];
    }
    v
}

/// Tail `c_a * int_t^inf (f_t - f_left) r^{-1-a} dr` of the Marchaud integral
/// for a constant left extension; zero at `t = 0` by convention.
pub fn tail_term(f_t: &[f64], f_left: &[f64], t: f64, alpha: AlphaOrder) -> Vec<f64> {
    let a = alpha.value();
    if t <= 0.0 {
        return vec![0.0; f_t.len()];
    }
    let factor = t.powf(-a) / gamma(1.0 - a);
    f_t.iter().zip(f_left).map(|(x, l)| (x - l) * factor).collect()
}

/// Marchaud derivative on a fixed grid, with the L1 kernel transformed once
/// and reused across calls.
#[derive(Debug)]
pub struct MarchaudOperator {
    alpha: f64,
    dt: f64,
    steps: usize,
    kernel: CausalKernel,
    jump: Vec<f64>,
}

impl MarchaudOperator {
    pub fn new(alpha: AlphaOrder, grid: TimeGrid) -> Self {
        let a = alpha.value();
        let dt = grid.dt();
        let steps = grid.steps();
        let kernel = CausalKernel::new(l1_weights(a, dt, steps));
        let g = gamma(1.0 - a);
        let jump = (0..=steps).map(|k| if k == 0 { 0.0 } else { (k as f64 * dt).powf(-a) / g }).collect();
        MarchaudOperator { alpha: a, dt, steps, kernel, jump }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `D^a f` at nodes `0..values.len()`; `values` may be shorter than the grid.
    pub fn apply(&self, values: &[f64], left: f64) -> Vec<f64> {
        self.apply_many(&[values.to_vec()], &[left]).pop().unwrap()
    }

    /// Componentwise version of [`MarchaudOperator::apply`].
    pub fn apply_many(&self, columns: &[Vec<f64>], lefts: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(columns.len(), lefts.len());
        let incs: Vec<Vec<f64>> = columns
            .iter()
            .map(|c| {
                assert!(!c.is_empty() && c.len() <= self.steps + 1, "column exceeds grid");
                c.windows(2).map(|w| w[1] - w[0]).collect()
            })
            .collect();
        let convs = self.kernel.apply_many(&incs);
        columns
            .iter()
            .zip(lefts)
            .zip(convs)
            .map(|((c, &left), conv)| {
                let jump = c[0] - left;
                let mut out = Vec::with_capacity(c.len());
                out.push(0.0);
                for k in 1..c.len() {
                    out.push(conv[k - 1] + jump * self.jump[k]);
                }
                out
            })
            .collect()
    }
}

/// Marchaud derivative `D^a_+ f` at every grid node.
pub fn marchaud_derivative(f: &SampledFunction, alpha: AlphaOrder) -> SampledFunction {
    let op = MarchaudOperator::new(alpha, f.grid);
    SampledFunction { grid: f.grid, values: op.apply(&f.values, f.left_extension), left_extension: 0.0 }
}

/// The two parts of the Marchaud derivative: the integral over `r in (0, t)`
/// and the closed-form tail over `r > t`. Their sum is [`marchaud_derivative`].
pub fn marchaud_split(f: &SampledFunction, alpha: AlphaOrder) -> (Vec<f64>, Vec<f64>) {
    let total = marchaud_derivative(f, alpha).values;
    let times = f.grid.times();
    let tail: Vec<f64> =
        f.values.iter().zip(&times).map(|(&v, &t)| tail_term(&[v], &[f.left_extension], t, alpha)[0]).collect();
    let near = total.iter().zip(&tail).map(|(a, b)| a - b).collect();
    (near, tail)
}

fn rl_kernel(alpha: f64, len: usize) -> Vec<f64> {
    let p = alpha + 1.0;
    (0..len)
        .map(|m| {
            if m == 0 {
                1.0
            } else {
                let m = m as f64;
                (m + 1.0).powf(p) - 2.0 * m.powf(p) + (m - 1.0).powf(p)
            }
        })
        .collect()
}

fn rl_left_values(values: &[f64], alpha: f64, dt: f64) -> Vec<f64> {
    let n = values.len() - 1;
    if n == 0 {
        return vec![0.0];
    }
    let kernel = CausalKernel::new(rl_kernel(alpha, n + 1));
    let mut g = values.to_vec();
    g[0] = 0.0;
    let conv = kernel.apply(&g);
    let scale = dt.powf(alpha) / gamma(alpha + 2.0);
    let p = alpha + 1.0;
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let kf = k as f64;
        let a0 = (kf - 1.0).powf(p) - (kf - 1.0 - alpha) * kf.powf(alpha);
        out[k] = scale * (conv[k] + a0 * values[0]);
    }
    out
}

/// Left Riemann-Liouville integral `I^a_{0+} f`, exact for piecewise linear `f`.
/// Orders in `(0, 1]` are accepted.
pub fn rl_integral_left(f: &SampledFunction, alpha: f64) -> Result<SampledFunction> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("integration order must lie in (0, 1], got {alpha}")));
    }
    let values = rl_left_values(&f.values, alpha, f.grid.dt());
    Ok(SampledFunction { grid: f.grid, values, left_extension: 0.0 })
}

/// Right Riemann-Liouville integral `I^a_{tau-} f` on `[0, tau]`, the mirror of
/// [`rl_integral_left`].
pub fn rl_integral_right(f: &SampledFunction, alpha: f64) -> Result<SampledFunction> {
    let reflected: Vec<f64> = f.values.iter().rev().copied().collect();
    let g = SampledFunction { grid: f.grid, values: reflected, left_extension: 0.0 };
    let mut out = rl_integral_left(&g, alpha)?;
    out.values.reverse();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let f = SampledFunction::from_fn(grid(64), |_| 3.5);
        let d = marchaud_derivative(&f, AlphaOrder::new(0.3).unwrap());
        assert!(d.values.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn derivative_of_ramp_matches_closed_form() {
        // f(t) = t for t >= 0 and 0 before: D^a f(t) = t^{1-a} / Gamma(2 - a).
        let a = 0.25;
        let f = SampledFunction::new(grid(37), grid(37).times(), 0.0).unwrap();
        let d = marchaud_derivative(&f, AlphaOrder::new(a).unwrap());
        assert_relative_eq!(d.values[37], 1.0 / gamma(1.75), max_relative = 1e-12);
        assert_relative_eq!(1.0 / gamma(1.75), 1.08807, max_relative = 1e-5);
        assert_relative_eq!(d.values[10], (10.0f64 / 37.0).powf(0.75) / gamma(1.75), max_relative = 1e-12);
    }

    #[test]
    fn jump_at_origin_is_the_tail_term() {
        // A constant function with a different left level has derivative
        // equal to the tail term alone.
        let a = AlphaOrder::new(0.2).unwrap();
        let f = SampledFunction::new(grid(8), vec![1.0; 9], 0.0).unwrap();
        let d = marchaud_derivative(&f, a);
        let tail = tail_term(&[1.0], &[0.0], 1.0, a)[0];
        assert_relative_eq!(d.values[8], tail, max_relative = 1e-13);
        assert_relative_eq!(tail, 1.0 / gamma(0.8), max_relative = 1e-13);
        assert_relative_eq!(tail, 0.858934, max_relative = 1e-5);
        assert_eq!(tail_term(&[2.0], &[2.0], 1.0, a), vec![0.0]);
        assert_eq!(tail_term(&[2.0], &[1.0], 0.0, a), vec![0.0]);
        assert_relative_eq!(tail_term(&[2.0], &[0.0], 1.0, a)[0], 2.0 * tail, max_relative = 1e-15);
    }

    #[test]
    fn split_adds_up() {
        let a = AlphaOrder::new(0.3).unwrap();
        let f = SampledFunction::new(grid(50), grid(50).times().iter().map(|t| t.sin() + 1.0).collect(), 0.5).unwrap();
        let (near, tail) = marchaud_split(&f, a);
        let total = marchaud_derivative(&f, a).values;
        for k in 0..=50 {
            assert!((near[k] + tail[k] - total[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn rl_integral_closed_forms() {
        let g = grid(200);
        let one = SampledFunction::from_fn(g, |_| 1.0);
        let i1 = rl_integral_left(&one, 1.0).unwrap();
        for (k, t) in g.times().iter().enumerate() {
            assert!((i1.values[k] - t).abs() < 1e-12);
        }
        let ih = rl_integral_left(&one, 0.5).unwrap();
        for (k, t) in g.times().iter().enumerate() {
            assert!((ih.values[k] - 2.0 * (t / std::f64::consts::PI).sqrt()).abs() < 1e-12);
        }
        let r1 = rl_integral_right(&one, 1.0).unwrap();
        for (k, t) in g.times().iter().enumerate() {
            assert!((r1.values[k] - (1.0 - t)).abs() < 1e-12);
        }
        let zero = SampledFunction::from_fn(g, |_| 0.0);
        assert!(rl_integral_left(&zero, 0.3).unwrap().values.iter().all(|&x| x == 0.0));
        assert!(rl_integral_left(&one, 0.0).is_err());
    }

    #[test]
    fn rl_integral_of_power_function() {
        // I^a t = t^{1+a} / Gamma(2 + a), exact for linear data.
        let g = grid(100);
        let f = SampledFunction::from_fn(g, |t| t);
        let a = 0.35;
        let i = rl_integral_left(&f, a).unwrap();
        for (k, t) in g.times().iter().enumerate() {
            assert!((i.values[k] - t.powf(1.0 + a) / gamma(2.0 + a)).abs() < 1e-12);
        }
    }

    #[test]
    fn right_integral_is_reflected_left_integral() {
        let g = grid(64);
        let f = SampledFunction::from_fn(g, |t| (3.0 * t).cos() + t * t);
        let reflected = SampledFunction::from_fn(g, |t| (3.0 * (1.0 - t)).cos() + (1.0 - t) * (1.0 - t));
        let r = rl_integral_right(&f, 0.4).unwrap();
        let l = rl_integral_left(&reflected, 0.4).unwrap();
        for k in 0..=64 {
            assert!((r.values[k] - l.values[64 - k]).abs() < 1e-12);
        }
    }

    fn roundtrip_error(alpha: f64, n: usize) -> f64 {
        let g = grid(n);
        let f = SampledFunction::from_fn(g, f64::sin);
        let i = rl_integral_left(&f, alpha).unwrap();
        let d = marchaud_derivative(&i, AlphaOrder::new(alpha).unwrap());
        d.values.iter().zip(&f.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn derivative_inverts_integral() {
        for &a in &[0.1, 0.25, 0.45] {
            let e1 = roundtrip_error(a, 2048);
            let e2 = roundtrip_error(a, 4096);
            assert!(e2 <= 1e-3, "alpha {a}: error {e2}");
            assert!(e2 <= 0.5 * e1 * 1.05, "alpha {a}: {e1} -> {e2}");
        }
    }

    #[test]
    fn holder_regularity_controls_grid_stability() {
        // |t - 1/2|^eta evaluated at t = 1/2: finite limit when eta > a, blows
        // up like dt^{eta - a} under refinement when eta < a.
        let a = AlphaOrder::new(0.4).unwrap();
        let at_half = |eta: f64, n: usize| {
            let f = SampledFunction::from_fn(grid(n), |t| (t - 0.5).abs().powf(eta));
            marchaud_derivative(&f, a).values[n / 2]
        };
        let smooth: Vec<f64> = [512, 2048, 8192].iter().map(|&n| at_half(0.8, n)).collect();
        assert!((smooth[2] - smooth[1]).abs() < (smooth[1] - smooth[0]).abs());
        assert!((smooth[2] - smooth[1]).abs() < 0.05 * smooth[2].abs());
        let rough: Vec<f64> = [512, 2048, 8192].iter().map(|&n| at_half(0.05, n)).collect();
        assert!(rough[2].abs() > 1.5 * rough[1].abs() && rough[1].abs() > 1.5 * rough[0].abs());
    }

    proptest! {
        #[test]
        fn operators_are_linear(
            xs in prop::collection::vec(-5.0f64..5.0, 33),
            ys in prop::collection::vec(-5.0f64..5.0, 33),
            c in -3.0f64..3.0,
            a in 0.05f64..0.95,
        ) {
            let g = grid(32);
            let alpha = AlphaOrder::new(a).unwrap();
            let f1 = SampledFunction::new(g, xs.clone(), 0.7).unwrap();
            let f2 = SampledFunction::new(g, ys.clone(), -0.2).unwrap();
            let comb: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x + c * y).collect();
            let f3 = SampledFunction::new(g, comb, 0.7 - 0.2 * c).unwrap();
            let d1 = marchaud_derivative(&f1, alpha).values;
            let d2 = marchaud_derivative(&f2, alpha).values;
            let d3 = marchaud_derivative(&f3, alpha).values;
            let i1 = rl_integral_left(&f1, a).unwrap().values;
            let i2 = rl_integral_left(&f2, a).unwrap().values;
            let i3 = rl_integral_left(&f3, a).unwrap().values;
            for k in 0..=32 {
                let s = 1.0 + d1[k].abs() + d2[k].abs();
                prop_assert!((d3[k] - d1[k] - c * d2[k]).abs() < 1e-10 * s);
                prop_assert!((i3[k] - i1[k] - c * i2[k]).abs() < 1e-10 * (1.0 + i1[k].abs() + i2[k].abs()));
            }
        }
    }
}
