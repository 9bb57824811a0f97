//! Experiment configuration: a flat `key = value` document with `[section]`
//! headers. Every command reads `[run]` plus its own sections; unknown
//! sections and keys are rejected.

use crate::error::CliError;
use fraclan::sde_engine::{Diffusion, DriftModel, Fou, SdeConfig, TanhDrift};
use fraclan::Hurst;
use std::collections::BTreeSet;
use std::path::PathBuf;
use toml::{Table, Value};

type Res<T> = std::result::Result<T, CliError>;

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parsed document with consumption tracking, so leftovers can be reported.
pub struct Document {
    root: Table,
    used: BTreeSet<String>,
}

impl Document {
    pub fn parse(text: &str) -> Res<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| cfg_err(format!("malformed config: {e}")))?;
        for (name, v) in &root {
            if !v.is_table() {
                return Err(cfg_err(format!("top-level key {name:?} must live inside a [section]")));
            }
            for (key, value) in v.as_table().unwrap() {
                if value.is_table() {
                    return Err(cfg_err(format!("nested table [{name}.{key}] is not allowed")));
                }
            }
        }
        Ok(Document { root, used: BTreeSet::new() })
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<Value> {
        let v = self.root.get(section)?.as_table()?.get(key)?.clone();
        self.used.insert(format!("{section}.{key}"));
        Some(v)
    }

    fn required(&mut self, section: &str, key: &str) -> Res<Value> {
        self.raw(section, key).ok_or_else(|| cfg_err(format!("missing required key [{section}] {key}")))
    }

    pub fn f64(&mut self, section: &str, key: &str) -> Res<f64> {
        let v = self.required(section, key)?;
        as_f64(&v).ok_or_else(|| cfg_err(format!("[{section}] {key} must be a number")))
    }

    pub fn f64_or(&mut self, section: &str, key: &str, default: f64) -> Res<f64> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => as_f64(&v).ok_or_else(|| cfg_err(format!("[{section}] {key} must be a number"))),
        }
    }

    pub fn opt_f64(&mut self, section: &str, key: &str) -> Res<Option<f64>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => as_f64(&v).map(Some).ok_or_else(|| cfg_err(format!("[{section}] {key} must be a number"))),
        }
    }

    pub fn usize(&mut self, section: &str, key: &str) -> Res<usize> {
        let v = self.required(section, key)?;
        as_usize(&v).ok_or_else(|| cfg_err(format!("[{section}] {key} must be a non-negative integer")))
    }

    pub fn usize_or(&mut self, section: &str, key: &str, default: usize) -> Res<usize> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => as_usize(&v).ok_or_else(|| cfg_err(format!("[{section}] {key} must be a non-negative integer"))),
        }
    }

    pub fn opt_u64(&mut self, section: &str, key: &str) -> Res<Option<u64>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            Some(_) => Err(cfg_err(format!("[{section}] {key} must be a non-negative integer"))),
        }
    }

    pub fn string(&mut self, section: &str, key: &str) -> Res<String> {
        match self.required(section, key)? {
            Value::String(s) => Ok(s),
            _ => Err(cfg_err(format!("[{section}] {key} must be a string"))),
        }
    }

    pub fn opt_string(&mut self, section: &str, key: &str) -> Res<Option<String>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(cfg_err(format!("[{section}] {key} must be a string"))),
        }
    }

    pub fn vec(&mut self, section: &str, key: &str) -> Res<Vec<f64>> {
        let v = self.required(section, key)?;
        as_vec(&v).ok_or_else(|| cfg_err(format!("[{section}] {key} must be a list of numbers")))
    }

    pub fn opt_vec(&mut self, section: &str, key: &str) -> Res<Option<Vec<f64>>> {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => {
                as_vec(&v).map(Some).ok_or_else(|| cfg_err(format!("[{section}] {key} must be a list of numbers")))
            }
        }
    }

    /// Fails on any section or key that was never read.
    pub fn finish(self) -> Res<()> {
        let mut unknown = Vec::new();
        for (name, v) in &self.root {
            for key in v.as_table().unwrap().keys() {
                let full = format!("{name}.{key}");
                if !self.used.contains(&full) {
                    unknown.push(format!("[{name}] {key}"));
                }
            }
            if v.as_table().unwrap().is_empty() {
                unknown.push(format!("[{name}]"));
            }
        }
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(cfg_err(format!("unknown config entries: {}", unknown.join(", "))))
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as usize),
        _ => None,
    }
}

fn as_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

fn float_list(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

/// Command-line overrides applied on top of the `[run]` section.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// `[run]`: master seed and output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    fn read(doc: &mut Document, ov: &Overrides) -> Res<Self> {
        let seed = match (ov.seed, doc.opt_u64("run", "seed")?) {
            (Some(s), _) | (None, Some(s)) => s,
            (None, None) => return Err(cfg_err("missing required key [run] seed (or pass --seed)")),
        };
        let out_dir = match (&ov.out_dir, doc.opt_string("run", "out_dir")?) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => PathBuf::from(p),
            (None, None) => return Err(cfg_err("missing required key [run] out_dir (or pass --out-dir)")),
        };
        Ok(RunConfig { seed, out_dir })
    }

    fn write(&self, root: &mut Table) -> Res<()> {
        let seed = i64::try_from(self.seed).map_err(|_| cfg_err("seed does not fit a signed 64-bit integer"))?;
        let mut t = Table::new();
        t.insert("seed".into(), Value::Integer(seed));
        t.insert("out_dir".into(), Value::String(self.out_dir.to_string_lossy().into_owned()));
        root.insert("run".into(), Value::Table(t));
        Ok(())
    }
}

/// Built-in drift families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftName {
    Fou,
    Tanh,
}

impl DriftName {
    fn parse(s: &str) -> Res<Self> {
        match s {
            "fou" => Ok(DriftName::Fou),
            "tanh" => Ok(DriftName::Tanh),
            other => Err(cfg_err(format!("[model] drift must be \"fou\" or \"tanh\", got {other:?}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DriftName::Fou => "fou",
            DriftName::Tanh => "tanh",
        }
    }
}

/// `[model]`: the SDE `dY = b(Y; theta) dt + sigma dB^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hurst: f64,
    pub drift: DriftName,
    pub dim: usize,
    pub theta: Vec<f64>,
    /// Row-major `dim x dim`.
    pub sigma: Vec<f64>,
    pub y0: Vec<f64>,
}

impl ModelConfig {
    fn read(doc: &mut Document) -> Res<Self> {
        let hurst = doc.f64("model", "hurst")?;
        let drift = DriftName::parse(&doc.string("model", "drift")?)?;
        let dim = doc.usize_or("model", "dim", 1)?;
        if dim == 0 {
            return Err(cfg_err("[model] dim must be positive"));
        }
        let theta = doc.vec("model", "theta")?;
        let sigma = doc.opt_vec("model", "sigma")?.unwrap_or_else(|| identity(dim));
        let y0 = doc.opt_vec("model", "y0")?.unwrap_or_else(|| vec![0.0; dim]);
        let m = ModelConfig { hurst, drift, dim, theta, sigma, y0 };
        m.build()?;
        Ok(m)
    }

    fn write(&self, root: &mut Table) {
        let mut t = Table::new();
        t.insert("hurst".into(), Value::Float(self.hurst));
        t.insert("drift".into(), Value::String(self.drift.as_str().into()));
        t.insert("dim".into(), Value::Integer(self.dim as i64));
        t.insert("theta".into(), float_list(&self.theta));
        t.insert("sigma".into(), float_list(&self.sigma));
        t.insert("y0".into(), float_list(&self.y0));
        root.insert("model".into(), Value::Table(t));
    }

    /// Drift, SDE configuration and Hurst exponent, validated.
    pub fn build(&self) -> Res<Model> {
        let hurst = Hurst::long_memory(self.hurst).map_err(|e| cfg_err(format!("[model] hurst: {e}")))?;
        let drift: Box<dyn DriftModel> = match self.drift {
            DriftName::Fou if self.theta.len() == 1 => Box::new(Fou::isotropic(self.dim)),
            DriftName::Fou if self.theta.len() == self.dim => Box::new(Fou::diagonal(self.dim)),
            DriftName::Fou => return Err(cfg_err("[model] theta for fou needs 1 or dim entries")),
            DriftName::Tanh => Box::new(TanhDrift::new(self.dim)),
        };
        drift.validate(&self.theta).map_err(|e| cfg_err(format!("[model] theta: {e}")))?;
        let sigma = Diffusion::new(self.dim, &self.sigma).map_err(|e| cfg_err(format!("[model] sigma: {e}")))?;
        let sde = SdeConfig::new(self.y0.clone(), sigma, self.theta.clone())
            .map_err(|e| cfg_err(format!("[model] y0: {e}")))?;
        Ok(Model { drift, sde, hurst })
    }
}

fn identity(d: usize) -> Vec<f64> {
    (0..d * d).map(|k| if k / d == k % d { 1.0 } else { 0.0 }).collect()
}

/// A validated model ready for simulation.
pub struct Model {
    pub drift: Box<dyn DriftModel>,
    pub sde: SdeConfig,
    pub hurst: Hurst,
}

fn positive(section: &str, key: &str, x: f64) -> Res<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(cfg_err(format!("[{section}] {key} must be positive, got {x}")))
    }
}

fn at_least(section: &str, key: &str, x: usize, min: usize) -> Res<usize> {
    if x >= min {
        Ok(x)
    } else {
        Err(cfg_err(format!("[{section}] {key} must be at least {min}, got {x}")))
    }
}

fn section(root: &mut Table, name: &str, entries: Vec<(&str, Value)>) {
    let mut t = Table::new();
    for (k, v) in entries {
        t.insert(k.into(), v);
    }
    root.insert(name.into(), Value::Table(t));
}

fn opt_float(x: Option<f64>) -> Option<Value> {
    x.map(Value::Float)
}

fn int(x: usize) -> Value {
    Value::Integer(x as i64)
}

/// `sample-fbm`: `[run]` and `[sample_fbm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFbmConfig {
    pub run: RunConfig,
    pub hurst: f64,
    pub horizon: f64,
    pub steps: usize,
    pub replicas: usize,
    pub dim: usize,
    pub paths_to_write: usize,
    /// Side of the `(s, t)` grid of the covariance report.
    pub cov_points: usize,
}

impl SampleFbmConfig {
    pub fn parse(text: &str, ov: &Overrides) -> Res<Self> {
        let mut doc = Document::parse(text)?;
        let run = RunConfig::read(&mut doc, ov)?;
        let s = "sample_fbm";
        let c = SampleFbmConfig {
            run,
            hurst: doc.f64(s, "hurst")?,
            horizon: positive(s, "horizon", doc.f64(s, "horizon")?)?,
            steps: at_least(s, "steps", doc.usize(s, "steps")?, 1)?,
            replicas: at_least(s, "replicas", doc.usize(s, "replicas")?, 1)?,
            dim: at_least(s, "dim", doc.usize_or(s, "dim", 1)?, 1)?,
            paths_to_write: doc.usize_or(s, "paths_to_write", 1)?,
            cov_points: at_least(s, "cov_points", doc.usize_or(s, "cov_points", 8)?, 1)?,
        };
        doc.finish()?;
        Hurst::new(c.hurst).map_err(|e| cfg_err(format!("[sample_fbm] hurst: {e}")))?;
        if c.cov_points > c.steps {
            return Err(cfg_err("[sample_fbm] cov_points exceeds steps"));
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Res<String> {
        let mut root = Table::new();
        self.run.write(&mut root)?;
        section(
            &mut root,
            "sample_fbm",
            vec![
                ("hurst", Value::Float(self.hurst)),
                ("horizon", Value::Float(self.horizon)),
                ("steps", int(self.steps)),
                ("replicas", int(self.replicas)),
                ("dim", int(self.dim)),
                ("paths_to_write", int(self.paths_to_write)),
                ("cov_points", int(self.cov_points)),
            ],
        );
        Ok(root.to_string())
    }
}

/// `solve`: `[run]`, `[model]` and `[solve]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub run: RunConfig,
    pub model: ModelConfig,
    pub tau: f64,
    pub dt: f64,
    pub replicas: usize,
    /// Burn-in before the observation window; `None` starts observing at `y0`.
    pub burn_in: Option<f64>,
    pub paths_to_write: usize,
}

impl SolveConfig {
    pub fn parse(text: &str, ov: &Overrides) -> Res<Self> {
        let mut doc = Document::parse(text)?;
        let run = RunConfig::read(&mut doc, ov)?;
        let model = ModelConfig::read(&mut doc)?;
        let s = "solve";
        let c = SolveConfig {
            run,
            model,
            tau: positive(s, "tau", doc.f64(s, "tau")?)?,
            dt: positive(s, "dt", doc.f64(s, "dt")?)?,
            replicas: at_least(s, "replicas", doc.usize(s, "replicas")?, 1)?,
            burn_in: doc.opt_f64(s, "burn_in")?,
            paths_to_write: doc.usize_or(s, "paths_to_write", 1)?,
        };
        doc.finish()?;
        if c.burn_in.is_some_and(|b| !(b >= 0.0)) {
            return Err(cfg_err("[solve] burn_in must be non-negative"));
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Res<String> {
        let mut root = Table::new();
        self.run.write(&mut root)?;
        self.model.write(&mut root);
        let mut entries = vec![
            ("tau", Value::Float(self.tau)),
            ("dt", Value::Float(self.dt)),
            ("replicas", int(self.replicas)),
            ("paths_to_write", int(self.paths_to_write)),
        ];
        if let Some(b) = opt_float(self.burn_in) {
            entries.push(("burn_in", b));
        }
        section(&mut root, "solve", entries);
        Ok(root.to_string())
    }
}

/// `[gamma]` knobs shared by `gamma` and `lan`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaKnobs {
    pub tau: f64,
    pub dt: f64,
    pub replicas: usize,
    /// Burn-in; `None` means `20 / alpha`.
    pub burn_in: Option<f64>,
    pub quad_replicas: usize,
    pub r_max: f64,
    pub window: f64,
    pub tail_tol: f64,
}

impl GammaKnobs {
    fn read(doc: &mut Document) -> Res<Self> {
        let s = "gamma";
        let k = GammaKnobs {
            tau: positive(s, "tau", doc.f64(s, "tau")?)?,
            dt: positive(s, "dt", doc.f64(s, "dt")?)?,
            replicas: at_least(s, "replicas", doc.usize(s, "replicas")?, 2)?,
            burn_in: doc.opt_f64(s, "burn_in")?,
            quad_replicas: at_least(s, "quad_replicas", doc.usize_or(s, "quad_replicas", 200)?, 2)?,
            r_max: positive(s, "r_max", doc.f64_or(s, "r_max", 50.0)?)?,
            window: positive(s, "window", doc.f64_or(s, "window", 200.0)?)?,
            tail_tol: positive(s, "tail_tol", doc.f64_or(s, "tail_tol", 0.1)?)?,
        };
        if let Some(b) = k.burn_in {
            if !(b >= 0.0) {
                return Err(cfg_err("[gamma] burn_in must be non-negative"));
            }
        }
        Ok(k)
    }

    fn write(&self, root: &mut Table) {
        let mut entries = vec![
            ("tau", Value::Float(self.tau)),
            ("dt", Value::Float(self.dt)),
            ("replicas", int(self.replicas)),
            ("quad_replicas", int(self.quad_replicas)),
            ("r_max", Value::Float(self.r_max)),
            ("window", Value::Float(self.window)),
            ("tail_tol", Value::Float(self.tail_tol)),
        ];
        if let Some(b) = opt_float(self.burn_in) {
            entries.push(("burn_in", b));
        }
        section(root, "gamma", entries);
    }
}

/// `gamma`: `[run]`, `[model]` and `[gamma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaConfig {
    pub run: RunConfig,
    pub model: ModelConfig,
    pub gamma: GammaKnobs,
}

impl GammaConfig {
    pub fn parse(text: &str, ov: &Overrides) -> Res<Self> {
        let mut doc = Document::parse(text)?;
        let run = RunConfig::read(&mut doc, ov)?;
        let model = ModelConfig::read(&mut doc)?;
        let gamma = GammaKnobs::read(&mut doc)?;
        doc.finish()?;
        Ok(GammaConfig { run, model, gamma })
    }

    pub fn to_toml(&self) -> Res<String> {
        let mut root = Table::new();
        self.run.write(&mut root)?;
        self.model.write(&mut root);
        self.gamma.write(&mut root);
        Ok(root.to_string())
    }
}

/// `lan`: `[run]`, `[model]`, `[lan]` and `[gamma]` (the reference `Gamma`).
#[derive(Debug, Clone, PartialEq)]
pub struct LanConfig {
    pub run: RunConfig,
    pub model: ModelConfig,
    pub u: Vec<f64>,
    pub taus: Vec<f64>,
    pub dt: f64,
    pub replicas: usize,
    /// Left tail of the Wiener driver as a multiple of `tau`.
    pub tail_factor: f64,
    pub histogram_bins: usize,
    pub gamma: GammaKnobs,
}

impl LanConfig {
    pub fn parse(text: &str, ov: &Overrides) -> Res<Self> {
        let mut doc = Document::parse(text)?;
        let run = RunConfig::read(&mut doc, ov)?;
        let model = ModelConfig::read(&mut doc)?;
        let s = "lan";
        let u = doc.vec(s, "u")?;
        let taus = doc.vec(s, "taus")?;
        let dt = positive(s, "dt", doc.f64(s, "dt")?)?;
        let replicas = at_least(s, "replicas", doc.usize(s, "replicas")?, 2)?;
        let tail_factor = doc.f64_or(s, "tail_factor", fraclan::fbm_core::DEFAULT_TAIL_FACTOR)?;
        let histogram_bins = at_least(s, "histogram_bins", doc.usize_or(s, "histogram_bins", 30)?, 1)?;
        let gamma = GammaKnobs::read(&mut doc)?;
        doc.finish()?;
        if u.len() != model.theta.len() {
            return Err(cfg_err("[lan] u must have as many entries as [model] theta"));
        }
        if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
            return Err(cfg_err("[lan] taus must be a non-empty list of positive horizons"));
        }
        if !(tail_factor >= 0.0) {
            return Err(cfg_err("[lan] tail_factor must be non-negative"));
        }
        Ok(LanConfig { run, model, u, taus, dt, replicas, tail_factor, histogram_bins, gamma })
    }

    pub fn to_toml(&self) -> Res<String> {
        let mut root = Table::new();
        self.run.write(&mut root)?;
        self.model.write(&mut root);
        section(
            &mut root,
            "lan",
            vec![
                ("u", float_list(&self.u)),
                ("taus", float_list(&self.taus)),
                ("dt", Value::Float(self.dt)),
                ("replicas", int(self.replicas)),
                ("tail_factor", Value::Float(self.tail_factor)),
                ("histogram_bins", int(self.histogram_bins)),
            ],
        );
        self.gamma.write(&mut root);
        Ok(root.to_string())
    }
}

/// `mle-fou`: `[run]` and `[mle]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MleConfig {
    pub run: RunConfig,
    pub hurst: f64,
    pub theta: f64,
    pub sigma: f64,
    pub y0: f64,
    pub tau: f64,
    pub dt: f64,
    pub replicas: usize,
}

impl MleConfig {
    pub fn parse(text: &str, ov: &Overrides) -> Res<Self> {
        let mut doc = Document::parse(text)?;
        let run = RunConfig::read(&mut doc, ov)?;
        let s = "mle";
        let c = MleConfig {
            run,
            hurst: doc.f64(s, "hurst")?,
            theta: positive(s, "theta", doc.f64(s, "theta")?)?,
            sigma: doc.f64_or(s, "sigma", 1.0)?,
            y0: doc.f64_or(s, "y0", 0.0)?,
            tau: positive(s, "tau", doc.f64(s, "tau")?)?,
            dt: positive(s, "dt", doc.f64(s, "dt")?)?,
            replicas: at_least(s, "replicas", doc.usize(s, "replicas")?, 2)?,
        };
        doc.finish()?;
        if c.sigma == 0.0 {
            return Err(cfg_err("[mle] sigma = 0 removes the noise; the contrast is degenerate"));
        }
        c.model().build()?;
        Ok(c)
    }

    /// The scalar fOU model behind the benchmark.
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            hurst: self.hurst,
            drift: DriftName::Fou,
            dim: 1,
            theta: vec![self.theta],
            sigma: vec![self.sigma],
            y0: vec![self.y0],
        }
    }

    pub fn to_toml(&self) -> Res<String> {
        let mut root = Table::new();
        self.run.write(&mut root)?;
        section(
            &mut root,
            "mle",
            vec![
                ("hurst", Value::Float(self.hurst)),
                ("theta", Value::Float(self.theta)),
                ("sigma", Value::Float(self.sigma)),
                ("y0", Value::Float(self.y0)),
                ("tau", Value::Float(self.tau)),
                ("dt", Value::Float(self.dt)),
                ("replicas", int(self.replicas)),
            ],
        );
        Ok(root.to_string())
    }
}
