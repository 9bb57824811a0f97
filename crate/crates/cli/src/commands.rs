//! Command-line surface: argument parsing, the worker pool and file output.

use crate::config::{GammaConfig, LanConfig, MleConfig, Overrides, SampleFbmConfig, SolveConfig};
use crate::error::{CliError, CliResult};
use crate::experiments::{
    fbm_experiment, gamma_experiment, lan_experiment, mle_experiment, slope_ok, solve_experiment,
};
use crate::report;
use clap::{Args, Parser, Subcommand};
use fraclan::io::fmt_g17;
use std::path::{Path, PathBuf};

/// Name of the settings sidecar written next to every run's outputs.
pub const SIDECAR: &str = "settings.toml";

#[derive(Debug, Parser)]
#[command(name = "fraclan", version, about = "Simulation and LAN experiments for SDEs driven by fBm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample fBm paths and report their empirical covariance.
    SampleFbm(CommonArgs),
    /// Solve the SDE and report the ergodic second moment.
    Solve(CommonArgs),
    /// Log-likelihood ratios at theta + u / sqrt(tau) against the limit law.
    Lan(CommonArgs),
    /// Estimate Gamma(theta) by every applicable method.
    Gamma(CommonArgs),
    /// Maximum likelihood benchmark for the scalar fOU rate.
    MleFou(CommonArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed, overriding `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 or absent uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory, overriding `[run] out_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, out_dir: self.out_dir.clone() }
    }

    fn read_config(&self) -> CliResult<String> {
        std::fs::read_to_string(&self.config)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", self.config.display())))
    }
}

/// Files produced by a command, in write order.
#[derive(Debug, Default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// Human-readable summary lines for the terminal.
    pub notes: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Outputs { dir: dir.to_path_buf(), ..Default::default() })
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

/// Run one parsed command.
pub fn run(cli: Cli) -> CliResult<Outputs> {
    let (args, f): (&CommonArgs, fn(&CommonArgs) -> CliResult<Outputs>) = match &cli.command {
        Command::SampleFbm(a) => (a, sample_fbm),
        Command::Solve(a) => (a, solve),
        Command::Lan(a) => (a, lan),
        Command::Gamma(a) => (a, gamma),
        Command::MleFou(a) => (a, mle_fou),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", args.threads.unwrap_or(0))))?;
    pool.install(|| f(args))
}

fn sample_fbm(args: &CommonArgs) -> CliResult<Outputs> {
    let cfg = SampleFbmConfig::parse(&args.read_config()?, &args.overrides())?;
    let rep = fbm_experiment(&cfg)?;
    let mut out = Outputs::new(&cfg.run.out_dir)?;
    out.write(SIDECAR, &cfg.to_toml()?)?;
    for (i, p) in rep.paths.iter().enumerate() {
        out.write(&format!("fbm_path_{i}.csv"), &report::path_csv(p))?;
    }
    out.write("fbm_covariance.csv", &report::fbm_covariance_csv(&rep))?;
    out.notes.push(format!("covariance: max |z| = {:.3} over {} cells", rep.max_abs_z(), rep.cells.len()));
    Ok(out)
}

fn solve(args: &CommonArgs) -> CliResult<Outputs> {
    let cfg = SolveConfig::parse(&args.read_config()?, &args.overrides())?;
    let rep = solve_experiment(&cfg)?;
    let mut out = Outputs::new(&cfg.run.out_dir)?;
    out.write(SIDECAR, &cfg.to_toml()?)?;
    for (i, p) in rep.paths.iter().enumerate() {
        out.write(&format!("path_{i}.csv"), &report::path_csv(p))?;
    }
    out.write("second_moments.csv", &report::second_moments_csv(&rep))?;
    out.write("solve_summary.csv", &report::solve_summary_csv(&rep))?;
    out.notes.push(format!("time-averaged |Y|^2: {:.6} +- {:.6}", rep.summary.mean, rep.summary.se));
    if let Some(o) = rep.oracle {
        out.notes.push(format!("stationary variance oracle: {o:.6}"));
    }
    Ok(out)
}

fn gamma(args: &CommonArgs) -> CliResult<Outputs> {
    let cfg = GammaConfig::parse(&args.read_config()?, &args.overrides())?;
    let rep = gamma_experiment(&cfg)?;
    let mut out = Outputs::new(&cfg.run.out_dir)?;
    out.write(SIDECAR, &cfg.to_toml()?)?;
    out.write("gamma.csv", &report::gamma_csv(&rep.estimates))?;
    out.write("gamma_agreement.csv", &report::agreement_csv(&rep.agreement))?;
    for e in &rep.estimates {
        out.notes.push(format!("{}: trace {:.6}", e.method.label(), e.trace()));
        out.notes.extend(e.warnings.iter().map(|w| format!("warning ({}): {w}", e.method.label())));
    }
    let disagreements = rep.agreement.iter().filter(|a| !a.agree).count();
    out.notes.push(format!("{disagreements} of {} pairwise comparisons disagree", rep.agreement.len()));
    Ok(out)
}

fn lan(args: &CommonArgs) -> CliResult<Outputs> {
    let cfg = LanConfig::parse(&args.read_config()?, &args.overrides())?;
    let rep = lan_experiment(&cfg)?;
    let mut out = Outputs::new(&cfg.run.out_dir)?;
    out.write(SIDECAR, &cfg.to_toml()?)?;
    out.write("lan_gamma.csv", &report::gamma_csv(std::slice::from_ref(&rep.gamma)))?;
    for t in &rep.per_tau {
        let tag = fmt_g17(t.summary.tau);
        out.write(&format!("lan_tau_{tag}.csv"), &report::lan_rows_csv(&t.rows))?;
        let totals: Vec<f64> = t.rows.iter().map(|r| r.total).collect();
        let reference = t.summary.ks.map(|k| (k.ref_mean, k.ref_var));
        out.write(&format!("hist_lan_tau_{tag}.csv"), &report::histogram_csv(&totals, cfg.histogram_bins, reference))?;
        if t.summary.degenerate() {
            out.notes.push(format!("tau = {tag}: reference law is degenerate (u^T Gamma u = 0); KS skipped"));
        } else {
            out.notes.push(format!(
                "tau = {tag}: mean {:.4}, var {:.4}, KS p = {:.3}",
                t.summary.mean,
                t.summary.var,
                t.summary.ks.map_or(f64::NAN, |k| k.p_value)
            ));
        }
    }
    let summaries: Vec<_> = rep.per_tau.iter().map(|t| t.summary.clone()).collect();
    out.write("lan_summary.csv", &report::lan_summary_csv(&summaries))?;
    out.write("lan_signature.csv", &report::slope_csv(rep.slope, slope_ok(rep.slope)))?;
    out.write("plot_histograms.py", report::PLOT_SCRIPT)?;
    out.notes.extend(rep.gamma.warnings.iter().map(|w| format!("warning (gamma): {w}")));
    Ok(out)
}

fn mle_fou(args: &CommonArgs) -> CliResult<Outputs> {
    let cfg = MleConfig::parse(&args.read_config()?, &args.overrides())?;
    let rep = mle_experiment(&cfg)?;
    let mut out = Outputs::new(&cfg.run.out_dir)?;
    out.write(SIDECAR, &cfg.to_toml()?)?;
    out.write("mle.csv", &report::mle_csv(&rep))?;
    out.write("mle_summary.csv", &report::mle_summary_csv(&rep, cfg.theta))?;
    let reference = Some((0.0, 2.0 * cfg.theta));
    out.write("hist_mle_standardized.csv", &report::histogram_csv(&rep.standardized, 30, reference))?;
    out.write("plot_histograms.py", report::PLOT_SCRIPT)?;
    out.notes.push(format!(
        "theta_hat mean {:.5} +- {:.5}; var of sqrt(tau)(theta_hat - theta) {:.4} (target {})",
        rep.theta_summary.mean,
        rep.theta_summary.se,
        rep.standardized_var,
        2.0 * cfg.theta
    ));
    Ok(out)
}
