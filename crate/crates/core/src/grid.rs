//! Hurst exponent, uniform time grids and multi-component sampled paths.

use crate::error::{invalid, Result};

/// Hurst exponent in `(0, 1)`. Everything beyond plain fBm sampling needs the
/// long-memory range `1/2 < H < 1`, see [`Hurst::long_memory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(invalid(format!("Hurst exponent must lie in (0, 1), got {h}")));
        }
        Ok(Hurst(h))
    }

    /// Hurst exponent validated for the SDE and likelihood machinery.
    pub fn long_memory(h: f64) -> Result<Self> {
        let h = Hurst::new(h)?;
        h.require_long_memory()?;
        Ok(h)
    }

    pub fn require_long_memory(self) -> Result<()> {
        if self.0 <= 0.5 {
            return Err(invalid(format!("Hurst exponent must exceed 1/2 here, got {}", self.0)));
        }
        Ok(())
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Fractional order `kappa = H - 1/2` of the coupling operators.
    pub fn kappa(self) -> f64 {
        self.0 - 0.5
    }
}

/// Uniform grid `t_k = k * horizon / steps`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    /// Grid on `[0, horizon]` with step `dt`; `horizon / dt` must be an integer
    /// up to rounding.
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("step must be positive, got {dt}")));
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(format!("horizon {horizon} is not an integer multiple of the step {dt}")));
        }
        TimeGrid::new(steps * dt, steps as usize)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Values of a `dim`-component path at every grid node, stored row-major by
/// time (`values[k * dim + j]` is component `j` at `t_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Path {
    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Path { grid, dim, values: vec![0.0; (grid.steps() + 1) * dim] }
    }

    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("path dimension must be positive"));
        }
        if values.len() != (grid.steps() + 1) * dim {
            return Err(crate::Error::GridMismatch(format!(
                "expected {} values, got {}",
                (grid.steps() + 1) * dim,
                values.len()
            )));
        }
        Ok(Path { grid, dim, values })
    }

    /// Path from per-component columns, each of length `steps + 1`.
    pub fn from_components(grid: TimeGrid, columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.len();
        let n = grid.steps() + 1;
        if dim == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(crate::Error::GridMismatch("component length does not match grid".into()));
        }
        let mut values = vec![0.0; n * dim];
        for (j, col) in columns.iter().enumerate() {
            for (k, &x) in col.iter().enumerate() {
                values[k * dim + j] = x;
            }
        }
        Ok(Path { grid, dim, values })
    }

    /// Path starting at zero whose increments are given per component.
    pub fn from_increments(grid: TimeGrid, increments: &[Vec<f64>]) -> Result<Self> {
        let columns: Vec<Vec<f64>> = increments
            .iter()
            .map(|inc| {
                let mut col = Vec::with_capacity(inc.len() + 1);
                let mut acc = 0.0;
                col.push(0.0);
                for &d in inc {
                    acc += d;
                    col.push(acc);
                }
                col
            })
            .collect();
        Path::from_components(grid, &columns)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.dim + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.dim).copied().collect()
    }

    /// Forward increments `x_{k+1} - x_k` of component `j`.
    pub fn increments(&self, j: usize) -> Vec<f64> {
        let col = self.component(j);
        col.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Sub-path on nodes `start..=start + steps`, re-based to start at time zero.
    pub fn window(&self, start: usize, steps: usize) -> Result<Path> {
        if start + steps > self.grid.steps() || steps == 0 {
            return Err(crate::Error::GridMismatch("window exceeds the path".into()));
        }
        let grid = TimeGrid::new(steps as f64 * self.grid.dt(), steps)?;
        let values = self.values[start * self.dim..(start + steps + 1) * self.dim].to_vec();
        Path::from_values(grid, self.dim, values)
    }
}
