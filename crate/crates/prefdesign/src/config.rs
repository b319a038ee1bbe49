//! Experiment configuration and the `key = value` settings format.
//!
//! A settings file holds one `key = value` pair per line; blank lines and
//! lines starting with `#` are ignored. Keys are the long command-line flag
//! names, with `_` and `-` treated alike. Values given on the command line
//! replace values read from the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use prefdesign_core::algorithms::{SelectionStrategy, DEFAULT_SELECTIVE_THRESHOLD};
use prefdesign_core::estimator::validate_delta;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").to_ascii_lowercase().replace('_', "-")
}

impl Settings {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::config(format!("line {}: expected key = value", i + 1)))?;
            s.set(k, v.trim());
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize_key(key), value.into());
    }

    /// Overlays `other`, whose values win.
    pub fn merge(&mut self, other: Settings) {
        self.values.extend(other.values);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| HarnessError::config(format!("invalid value {v:?} for {key}"))))
            .transpose()
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    /// Fails on any key outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(HarnessError::config(format!("unknown setting {k:?}"))),
            None => Ok(()),
        }
    }
}

/// Where the arms of an experiment come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSource {
    /// [`crate::synthetic::make_synthetic`].
    Synthetic { d: usize, n: usize, margin: f64, seed: u64 },
    /// A preference CSV read with [`crate::data::read_preferences`].
    Replay { path: PathBuf },
    /// [`crate::synthetic::make_replay_style`].
    ReplayStyle { d: usize, n: usize, theta_norm: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub strategies: Vec<SelectionStrategy>,
    pub delta: f64,
    pub omega: f64,
    pub batch_size: usize,
    pub budget: u64,
    pub n_seeds: u64,
    pub first_seed: u64,
    pub source: InstanceSource,
    /// Train share of the seeded train/test split.
    pub split: f64,
    pub ridge: f64,
    pub refit_every: Option<usize>,
    pub trace_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            strategies: vec![
                SelectionStrategy::OursGreedy,
                SelectionStrategy::Random,
                SelectionStrategy::Uncertainty,
                SelectionStrategy::Selective { threshold: DEFAULT_SELECTIVE_THRESHOLD },
                SelectionStrategy::Apo,
                SelectionStrategy::DOptimal,
            ],
            delta: 0.1,
            omega: 1.0,
            batch_size: 50,
            budget: 1_500,
            n_seeds: 50,
            first_seed: 0,
            source: InstanceSource::Synthetic { d: 5, n: 200, margin: 0.05, seed: 0 },
            split: 0.8,
            ridge: 1e-5,
            refit_every: None,
            trace_path: None,
            summary_path: None,
        }
    }
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "strategies",
    "delta",
    "omega",
    "batch-size",
    "budget",
    "seeds",
    "first-seed",
    "source",
    "d",
    "n",
    "margin",
    "instance-seed",
    "theta-norm",
    "data",
    "split",
    "ridge",
    "selective-threshold",
    "refit-every",
    "output",
    "summary",
];

/// Parses a comma-separated strategy list; `selective` takes `threshold`.
pub fn parse_strategies(list: &str, threshold: f64) -> Result<Vec<SelectionStrategy>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            let s = SelectionStrategy::from_str(name)
                .map_err(|_| HarnessError::config(format!("unknown strategy {name:?}")))?;
            Ok(match s {
                SelectionStrategy::Selective { .. } => SelectionStrategy::Selective { threshold },
                other => other,
            })
        })
        .collect()
}

impl ExperimentConfig {
    /// Builds a config from settings; absent keys keep their defaults.
    pub fn from_settings(s: &Settings) -> Result<Self> {
        s.check_known(EXPERIMENT_KEYS)?;
        let def = ExperimentConfig::default();
        let threshold = s.parse_or("selective-threshold", DEFAULT_SELECTIVE_THRESHOLD)?;
        let strategies = match s.get("strategies") {
            Some(list) => parse_strategies(list, threshold)?,
            None => def
                .strategies
                .iter()
                .map(|st| match st {
                    SelectionStrategy::Selective { .. } => SelectionStrategy::Selective { threshold },
                    other => *other,
                })
                .collect(),
        };
        let seed = s.parse_or("instance-seed", 0u64)?;
        let source = match s.get("source").unwrap_or("synthetic") {
            "synthetic" => InstanceSource::Synthetic {
                d: s.parse_or("d", 5)?,
                n: s.parse_or("n", 200)?,
                margin: s.parse_or("margin", 0.05)?,
                seed,
            },
            "replay" => InstanceSource::Replay {
                path: s.parse("data")?.ok_or_else(|| HarnessError::config("replay source needs a data path"))?,
            },
            "replay-style" => InstanceSource::ReplayStyle {
                d: s.parse_or("d", 16)?,
                n: s.parse_or("n", 2_000)?,
                theta_norm: s.parse_or("theta-norm", 10.0)?,
                seed,
            },
            other => return Err(HarnessError::config(format!("unknown source {other:?}"))),
        };
        let trace_path: Option<PathBuf> = s.parse("output")?;
        let summary_path = s.parse("summary")?.or_else(|| trace_path.as_deref().map(default_summary_path));
        let cfg = ExperimentConfig {
            strategies,
            delta: s.parse_or("delta", def.delta)?,
            omega: s.parse_or("omega", def.omega)?,
            batch_size: s.parse_or("batch-size", def.batch_size)?,
            budget: s.parse_or("budget", def.budget)?,
            n_seeds: s.parse_or("seeds", def.n_seeds)?,
            first_seed: s.parse_or("first-seed", def.first_seed)?,
            source,
            split: s.parse_or("split", def.split)?,
            ridge: s.parse_or("ridge", def.ridge)?,
            refit_every: s.parse("refit-every")?,
            trace_path,
            summary_path,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(HarnessError::config("at least one strategy is required"));
        }
        for s in &self.strategies {
            s.validate().map_err(|e| HarnessError::config(e.to_string()))?;
        }
        validate_delta(self.delta).map_err(|e| HarnessError::config(e.to_string()))?;
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(HarnessError::config("omega must lie in (0, 1]"));
        }
        if self.batch_size == 0 || self.budget < self.batch_size as u64 {
            return Err(HarnessError::config("budget must be at least the batch size, which must be positive"));
        }
        if self.n_seeds == 0 {
            return Err(HarnessError::config("at least one seed is required"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(HarnessError::config("split fraction must lie in (0, 1)"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(HarnessError::config("ridge must be nonnegative"));
        }
        if self.refit_every == Some(0) {
            return Err(HarnessError::config("refit interval must be positive"));
        }
        Ok(())
    }
}

/// `trace.csv` becomes `trace_summary.csv`.
pub fn default_summary_path(trace: &Path) -> PathBuf {
    let stem = trace.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    trace.with_file_name(format!("{stem}_summary.csv"))
}
