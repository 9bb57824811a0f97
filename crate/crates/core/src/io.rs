//! Number formatting in C `%.17g` style and CSV round-tripping of paths.

use crate::error::{invalid, Result};
use crate::grid::{Path, TimeGrid};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

/// `x` formatted as C's `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    fmt_g(x, 17)
}

/// `x` formatted as C's `%.{precision}g`.
pub fn fmt_g(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let p = precision.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One CSV line of `%.17g` numbers.
pub fn csv_row(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{}", fmt_g17(*v));
    }
    line
}

/// Path as CSV with header `t,component_0,..`.
pub fn write_path_csv(path: &Path, out: &mut impl Write) -> std::io::Result<()> {
    let header: Vec<String> =
        std::iter::once("t".to_string()).chain((0..path.dim()).map(|j| format!("component_{j}"))).collect();
    writeln!(out, "{}", header.join(","))?;
    let grid = path.grid();
    let mut row = Vec::with_capacity(path.dim() + 1);
    for k in 0..=grid.steps() {
        row.clear();
        row.push(grid.time(k));
        row.extend_from_slice(path.row(k));
        writeln!(out, "{}", csv_row(&row))?;
    }
    Ok(())
}

/// Inverse of [`write_path_csv`]; the grid is rebuilt from the first and last
/// time stamps.
pub fn read_path_csv(input: impl BufRead) -> Result<Path> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| invalid("empty path file"))?.map_err(|e| invalid(e.to_string()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(invalid("path header must start with t"));
    }
    let dim = cols.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for line in lines {
        let line = line.map_err(|e| invalid(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| invalid(format!("bad number {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() != dim + 1 {
            return Err(invalid("ragged path row"));
        }
        times.push(nums[0]);
        values.extend_from_slice(&nums[1..]);
    }
    if times.len() < 2 {
        return Err(invalid("path needs at least two rows"));
    }
    let grid = TimeGrid::new(*times.last().unwrap() - times[0], times.len() - 1)?;
    Path::from_values(grid, dim, values)
}
