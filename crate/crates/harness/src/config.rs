//! Run configuration: a line-based "key = value" file with `[section]`
//! headers, fully overridable by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lg,
    Levy,
    Finite,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Lg => "lg",
            ModelKind::Levy => "levy",
            ModelKind::Finite => "finite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoKind {
    KalmanIbis,
    Smc2,
    Smc2Fw,
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgoKind::KalmanIbis => "kalman-ibis",
            AlgoKind::Smc2 => "smc2",
            AlgoKind::Smc2Fw => "smc2fw",
        })
    }
}

/// Everything one experiment needs. Model parameters double as the ground
/// truth when the data are simulated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelKind,
    pub algo: AlgoKind,
    pub n_theta: usize,
    pub n_x: usize,
    pub window: usize,
    /// Fixed bandwidth; ignored when `bandwidth_rule_a3` is set.
    pub bandwidth: f64,
    pub bandwidth_rule_a3: bool,
    pub ess_threshold: f64,
    pub pmmh_sweeps: usize,
    pub proposal_scale: f64,
    pub adapt_proposal: bool,
    pub predict_samples: usize,
    pub emit_timing: bool,
    pub seed: u64,
    pub replicates: usize,
    /// Observations per replicate when the data are simulated.
    pub n_steps: usize,
    /// Observation file; when absent each replicate simulates its own data.
    pub data: Option<PathBuf>,
    /// Summary file of a previous run used as the error reference.
    pub reference: Option<PathBuf>,
    pub out: PathBuf,
    // Model parameters (the simulation truth).
    pub lg_tau0: f64,
    pub lg_tau: f64,
    pub lg_lambda: f64,
    pub levy_kappa: f64,
    pub levy_delta: f64,
    pub levy_gamma: f64,
    pub levy_lambda: f64,
    pub finite_levels: Vec<f64>,
    pub finite_obs_sd: f64,
    pub finite_a: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Lg,
            algo: AlgoKind::Smc2Fw,
            n_theta: 100,
            n_x: 100,
            window: 125,
            bandwidth: 0.01,
            bandwidth_rule_a3: false,
            ess_threshold: 0.5,
            pmmh_sweeps: 1,
            proposal_scale: 0.3,
            adapt_proposal: true,
            predict_samples: 0,
            emit_timing: false,
            seed: 0,
            replicates: 1,
            n_steps: 100,
            data: None,
            reference: None,
            out: PathBuf::from("out"),
            lg_tau0: 1.0,
            lg_tau: 1.0,
            lg_lambda: 1.0,
            levy_kappa: 0.8,
            levy_delta: 1.2,
            levy_gamma: 0.5,
            levy_lambda: 0.4,
            finite_levels: vec![-1.0, 0.0, 1.0],
            finite_obs_sd: 0.8,
            finite_a: 1.0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 1 || self.n_x < 1 || self.window < 1 || self.replicates < 1 {
            bail!("n_theta, n_x, window and replicates must all be >= 1");
        }
        if self.n_steps < 1 {
            bail!("n_steps must be >= 1");
        }
        if !(self.bandwidth > 0.0) {
            bail!("bandwidth must be positive");
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            bail!("ess_threshold must be in (0, 1]");
        }
        if self.pmmh_sweeps < 1 {
            bail!("pmmh_sweeps must be >= 1");
        }
        if let Some(p) = &self.data {
            if !p.exists() {
                bail!("data file {} does not exist", p.display());
            }
        }
        if let Some(p) = &self.reference {
            if !p.exists() {
                bail!("reference file {} does not exist", p.display());
            }
        }
        if self.finite_levels.is_empty() || !(self.finite_obs_sd > 0.0) {
            bail!("finite model needs levels and a positive obs_sd");
        }
        Ok(())
    }
}

/// Parses the "key = value" format. Section headers group keys for the
/// reader; keys live in one flat namespace and a later assignment wins.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("key `{key}`: cannot parse `{value}`: {e}"))
}

pub fn parse_model(value: &str) -> Result<ModelKind> {
    match value {
        "lg" => Ok(ModelKind::Lg),
        "levy" => Ok(ModelKind::Levy),
        "finite" => Ok(ModelKind::Finite),
        other => bail!("unknown model `{other}` (expected lg, levy or finite)"),
    }
}

pub fn parse_algo(value: &str) -> Result<AlgoKind> {
    match value {
        "kalman-ibis" => Ok(AlgoKind::KalmanIbis),
        "smc2" => Ok(AlgoKind::Smc2),
        "smc2fw" => Ok(AlgoKind::Smc2Fw),
        other => bail!("unknown algorithm `{other}` (expected kalman-ibis, smc2 or smc2fw)"),
    }
}

impl RunConfig {
    /// Loads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let map = parse_kv(&text)?;
        let mut cfg = Self::default();
        cfg.apply(&map)?;
        Ok(cfg)
    }

    /// Applies a flat key/value map; unknown keys are rejected so typos
    /// cannot silently fall back to defaults.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in map {
            match key.as_str() {
                "model" => self.model = parse_model(value)?,
                "algo" => self.algo = parse_algo(value)?,
                "n_theta" => self.n_theta = parse_as(key, value)?,
                "n_x" => self.n_x = parse_as(key, value)?,
                "window" => self.window = parse_as(key, value)?,
                "bandwidth" => self.bandwidth = parse_as(key, value)?,
                "bandwidth_rule_a3" => self.bandwidth_rule_a3 = parse_as(key, value)?,
                "ess_threshold" => self.ess_threshold = parse_as(key, value)?,
                "pmmh_sweeps" => self.pmmh_sweeps = parse_as(key, value)?,
                "proposal_scale" => self.proposal_scale = parse_as(key, value)?,
                "adapt_proposal" => self.adapt_proposal = parse_as(key, value)?,
                "predict_samples" => self.predict_samples = parse_as(key, value)?,
                "emit_timing" => self.emit_timing = parse_as(key, value)?,
                "seed" => self.seed = parse_as(key, value)?,
                "replicates" => self.replicates = parse_as(key, value)?,
                "n_steps" => self.n_steps = parse_as(key, value)?,
                "data" => self.data = Some(PathBuf::from(value)),
                "reference" => self.reference = Some(PathBuf::from(value)),
                "out" => self.out = PathBuf::from(value),
                "tau0" => self.lg_tau0 = parse_as(key, value)?,
                "tau" => self.lg_tau = parse_as(key, value)?,
                "lambda" => self.lg_lambda = parse_as(key, value)?,
                "kappa" => self.levy_kappa = parse_as(key, value)?,
                "delta" => self.levy_delta = parse_as(key, value)?,
                "gamma" => self.levy_gamma = parse_as(key, value)?,
                "levy_lambda" => self.levy_lambda = parse_as(key, value)?,
                "levels" => {
                    self.finite_levels = value
                        .split(',')
                        .map(|v| parse_as("levels", v.trim()))
                        .collect::<Result<Vec<f64>>>()?
                }
                "obs_sd" => self.finite_obs_sd = parse_as(key, value)?,
                "a" => self.finite_a = parse_as(key, value)?,
                other => bail!("unknown configuration key `{other}`"),
            }
        }
        Ok(())
    }
}
