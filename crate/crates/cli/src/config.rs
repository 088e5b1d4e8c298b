//! Flat `key = value` experiment files.
//!
//! One assignment per line, `#` starts a comment, list values are separated
//! by commas (optionally wrapped in brackets). Integer entries accept the
//! shorthand `2^k`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use phasedelay::stats::DEFAULT_K_BASELINE;
use phasedelay::{Estimator, FeedbackScheme, SimplifiedClock, TimeGrid};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub n_steps: usize,
    pub delays: Vec<usize>,
    pub alphas: Vec<f64>,
    pub schemes: Vec<FeedbackScheme>,
    pub n_traj: usize,
    pub estimators: Vec<Estimator>,
    pub out_dir: PathBuf,
    pub k_baseline: usize,
    pub simplified_clock: SimplifiedClock,
    pub true_phase: f64,
    /// Linearized model used by `markone-check`.
    pub linear_alpha: f64,
    pub linear_taus: Vec<f64>,
    pub linear_paths: usize,
    pub linear_steps: usize,
    /// Grid for `theory`.
    pub n_bars: Vec<f64>,
    pub tau_min: f64,
    pub tau_points: usize,
    /// Trajectory dumped by `traj`.
    pub trajectory_index: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            n_steps: 1 << 14,
            delays: (0..=11).map(|k| 1 << k).collect(),
            alphas: vec![5.0, 10.0, 20.0],
            schemes: vec![FeedbackScheme::Simplified],
            n_traj: 4000,
            estimators: Estimator::ALL.to_vec(),
            out_dir: PathBuf::from("out"),
            k_baseline: DEFAULT_K_BASELINE,
            simplified_clock: SimplifiedClock::Current,
            true_phase: 0.0,
            linear_alpha: 100.0,
            linear_taus: vec![0.0, 5e-4, 1e-3, 2e-3],
            linear_paths: 10_000,
            linear_steps: 40_000,
            n_bars: vec![100.0, 1e4, 1e6],
            tau_min: 1e-4,
            tau_points: 41,
            trajectory_index: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "master_seed",
    "n_steps",
    "delays",
    "alphas",
    "schemes",
    "n_traj",
    "estimators",
    "out_dir",
    "k_baseline",
    "simplified_clock",
    "true_phase",
    "linear_alpha",
    "linear_taus",
    "linear_paths",
    "linear_steps",
    "n_bars",
    "tau_min",
    "tau_points",
    "trajectory_index",
];

impl ExperimentConfig {
    /// Parse and validate. Keys not mentioned keep their defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(config_err(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(config_err(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }

        let mut cfg = Self::default();
        for (key, value) in &entries {
            let v = value.as_str();
            match key.as_str() {
                "master_seed" => cfg.master_seed = scalar(key, v)?,
                "n_steps" => cfg.n_steps = integer(key, v)?,
                "delays" => cfg.delays = list(key, v, integer)?,
                "alphas" => cfg.alphas = list(key, v, scalar)?,
                "schemes" => cfg.schemes = list(key, v, scalar)?,
                "n_traj" => cfg.n_traj = integer(key, v)?,
                "estimators" => cfg.estimators = list(key, v, estimator)?,
                "out_dir" => cfg.out_dir = PathBuf::from(unquote(v)),
                "k_baseline" => cfg.k_baseline = integer(key, v)?,
                "simplified_clock" => cfg.simplified_clock = scalar(key, v)?,
                "true_phase" => cfg.true_phase = scalar(key, v)?,
                "linear_alpha" => cfg.linear_alpha = scalar(key, v)?,
                "linear_taus" => cfg.linear_taus = list(key, v, scalar)?,
                "linear_paths" => cfg.linear_paths = integer(key, v)?,
                "linear_steps" => cfg.linear_steps = integer(key, v)?,
                "n_bars" => cfg.n_bars = list(key, v, scalar)?,
                "tau_min" => cfg.tau_min = scalar(key, v)?,
                "tau_points" => cfg.tau_points = integer(key, v)?,
                "trajectory_index" => cfg.trajectory_index = integer(key, v)?,
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        TimeGrid::new(self.n_steps).map_err(|e| config_err(format!("n_steps: {e}")))?;
        if self.delays.is_empty() || self.alphas.is_empty() || self.schemes.is_empty() {
            return Err(config_err("delays, alphas and schemes must be nonempty".into()));
        }
        if self.estimators.is_empty() || self.n_bars.is_empty() || self.linear_taus.is_empty() {
            return Err(config_err("estimators, n_bars and linear_taus must be nonempty".into()));
        }
        for &d in &self.delays {
            if !d.is_power_of_two() || d > self.n_steps / 4 {
                return Err(config_err(format!(
                    "delay {d} must be a power of two in [1, n_steps/4 = {}]",
                    self.n_steps / 4
                )));
            }
        }
        // Sweeps additionally need the list to start at 1; that is checked
        // where the sweep runs, so a single-delay `traj` config stays valid.
        if self.delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("delays must strictly ascend".into()));
        }
        if self.alphas.iter().chain(&self.n_bars).any(|a| !a.is_finite() || *a < 0.0) {
            return Err(config_err("alphas and n_bars must be finite and nonnegative".into()));
        }
        if self.n_traj < 2 || self.linear_paths < 2 {
            return Err(config_err("n_traj and linear_paths must be at least 2".into()));
        }
        if self.k_baseline == 0 {
            return Err(config_err("k_baseline must be at least 1".into()));
        }
        if !(self.tau_min > 0.0 && self.tau_min <= 1.0) || self.tau_points < 2 {
            return Err(config_err("tau_min must lie in (0, 1] and tau_points >= 2".into()));
        }
        if !self.true_phase.is_finite() || !self.linear_alpha.is_finite() {
            return Err(config_err("true_phase and linear_alpha must be finite".into()));
        }
        Ok(())
    }
}

fn config_err(msg: String) -> CliError {
    CliError::Config(msg)
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn scalar<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    unquote(v)
        .trim()
        .parse()
        .map_err(|e| config_err(format!("{key}: cannot parse {v:?}: {e}")))
}

fn integer<T: TryFrom<u64>>(key: &str, v: &str) -> Result<T, CliError> {
    let v = unquote(v).trim();
    let n: u64 = match v.split_once('^') {
        Some((base, exp)) => {
            let base: u64 = scalar(key, base)?;
            let exp: u32 = scalar(key, exp)?;
            base.checked_pow(exp)
                .ok_or_else(|| config_err(format!("{key}: {v} overflows")))?
        }
        None => scalar(key, v)?,
    };
    T::try_from(n).map_err(|_| config_err(format!("{key}: {v} is out of range")))
}

fn estimator(key: &str, v: &str) -> Result<Estimator, CliError> {
    let v = unquote(v).trim();
    Estimator::parse(v).ok_or_else(|| config_err(format!("{key}: unknown estimator {v:?}")))
}

fn list<T>(key: &str, v: &str, item: fn(&str, &str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    let inner = v.trim();
    let inner = inner
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(inner);
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(key, s))
        .collect()
}
