//! Study configuration file.
//!
//! The file is a flat list of `key = value` lines (TOML syntax, no tables).
//! Every key is optional; an empty file describes the canonical study.
//!
//! | key                   | type                         | default          |
//! |-----------------------|------------------------------|------------------|
//! | `scenarios`           | list of 1-4 or `"custom"`    | `[1, 2, 3, 4]`   |
//! | `approaches`          | list of approach names       | all four         |
//! | `n`                   | integer >= 10                | 100              |
//! | `replications`        | integer >= 1                 | 10000            |
//! | `master_seed`         | integer >= 0                 | 2025             |
//! | `threads`             | integer >= 1                 | available cores  |
//! | `caliper`             | positive real (SD multiplier)| 0.2              |
//! | `caliper_scale`       | `"probability"` or `"logit"` | `"probability"`  |
//! | `alpha_level`         | real in (0, 1)               | 0.05             |
//! | `variance_outcome`    | `"Y1"`, `"Y2"` or `"both"`   | `"Y1"`           |
//! | `link`                | `"logit"` or `"probit"`      | `"logit"`        |
//! | `outdir`              | path                         | `"results"`      |
//! | `per_replication`     | boolean                      | false            |
//! | `error_correlation`   | real in (-1, 1)              | 0.0              |
//! | `max_degenerate_rate` | real in [0, 1]               | 0.01             |
//! | `custom_alpha`        | three reals                  | `[0, 0, 0]`      |
//! | `custom_beta`         | three reals                  | `[0, 0, 0]`      |
//! | `custom_gamma`        | three reals                  | `[0, 0, 0]`      |
//!
//! List values may also be written as a single comma-separated string.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::dgp::{scenario_params, ScenarioConfig, ScenarioId, CANONICAL_N, CANONICAL_REPLICATIONS};
use crate::error::{Error, Result};
use crate::matching::{Caliper, CaliperScale};
use crate::propensity::Link;
use crate::simulator::{Approach, StudyPlan, VarianceOutcome, DEFAULT_ALPHA_LEVEL, DEFAULT_MAX_DEGENERATE_RATE};

pub const DEFAULT_SEED: u64 = 2025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OutcomeSelector {
    #[default]
    Y1,
    Y2,
    #[serde(rename = "both")]
    Both,
}

impl OutcomeSelector {
    pub fn outcomes(self) -> Vec<VarianceOutcome> {
        match self {
            OutcomeSelector::Y1 => vec![VarianceOutcome::Y1],
            OutcomeSelector::Y2 => vec![VarianceOutcome::Y2],
            OutcomeSelector::Both => vec![VarianceOutcome::Y1, VarianceOutcome::Y2],
        }
    }
}

impl fmt::Display for OutcomeSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeSelector::Y1 => "Y1",
            OutcomeSelector::Y2 => "Y2",
            OutcomeSelector::Both => "both",
        })
    }
}

impl FromStr for OutcomeSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "y1" => Ok(OutcomeSelector::Y1),
            "y2" => Ok(OutcomeSelector::Y2),
            "both" => Ok(OutcomeSelector::Both),
            other => Err(format!("unknown outcome {other:?}, expected Y1, Y2 or both")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfigFile {
    pub scenarios: Vec<ScenarioId>,
    pub approaches: Vec<Approach>,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub threads: usize,
    pub caliper: f64,
    pub caliper_scale: CaliperScale,
    pub alpha_level: f64,
    pub variance_outcome: OutcomeSelector,
    pub link: Link,
    pub outdir: PathBuf,
    pub per_replication: bool,
    pub error_correlation: f64,
    pub max_degenerate_rate: f64,
    pub custom_alpha: [f64; 3],
    pub custom_beta: [f64; 3],
    pub custom_gamma: [f64; 3],
}

impl Default for StudyConfigFile {
    fn default() -> Self {
        StudyConfigFile {
            scenarios: (1..=4).map(ScenarioId::Canonical).collect(),
            approaches: Approach::ALL.to_vec(),
            n: CANONICAL_N,
            replications: CANONICAL_REPLICATIONS,
            master_seed: DEFAULT_SEED,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            caliper: 0.2,
            caliper_scale: CaliperScale::Probability,
            alpha_level: DEFAULT_ALPHA_LEVEL,
            variance_outcome: OutcomeSelector::Y1,
            link: Link::Logit,
            outdir: PathBuf::from("results"),
            per_replication: false,
            error_correlation: 0.0,
            max_degenerate_rate: DEFAULT_MAX_DEGENERATE_RATE,
            custom_alpha: [0.0; 3],
            custom_beta: [0.0; 3],
            custom_gamma: [0.0; 3],
        }
    }
}

fn type_error(key: &str, expected: &str, value: &Value) -> Error {
    Error::config(key, format!("expected {expected}, got {value}"))
}

fn as_count(key: &str, value: &Value) -> Result<u64> {
    match value {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(type_error(key, "a nonnegative integer", value)),
    }
}

fn as_real(key: &str, value: &Value) -> Result<f64> {
    match value {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(type_error(key, "a number", value)),
    }
}

fn as_bool(key: &str, value: &Value) -> Result<bool> {
    value.as_bool().ok_or_else(|| type_error(key, "true or false", value))
}

fn as_text(key: &str, value: &Value) -> Result<String> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        _ => Err(type_error(key, "a string", value)),
    }
}

fn parse_token<T: FromStr<Err = String>>(key: &str, token: &str) -> Result<T> {
    token.parse().map_err(|e: String| Error::config(key, e))
}

fn as_list<T: FromStr<Err = String>>(key: &str, value: &Value) -> Result<Vec<T>> {
    let tokens: Vec<String> = match value {
        Value::Array(items) => items.iter().map(|v| as_text(key, v)).collect::<Result<_>>()?,
        Value::String(s) => s.split(',').map(str::to_owned).collect(),
        Value::Integer(i) => vec![i.to_string()],
        _ => return Err(type_error(key, "a list", value)),
    };
    tokens.iter().map(|t| parse_token(key, t)).collect()
}

fn as_triple(key: &str, value: &Value) -> Result<[f64; 3]> {
    let items: Vec<f64> = match value {
        Value::Array(items) => items.iter().map(|v| as_real(key, v)).collect::<Result<_>>()?,
        Value::String(s) => s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::config(key, e.to_string())))
            .collect::<Result<_>>()?,
        _ => return Err(type_error(key, "three numbers", value)),
    };
    items
        .try_into()
        .map_err(|v: Vec<f64>| Error::config(key, format!("expected 3 numbers, got {}", v.len())))
}

/// Parses a configuration text and applies defaults; the result is validated.
pub fn parse_config_str(text: &str) -> Result<StudyConfigFile> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
    let mut cfg = StudyConfigFile::default();
    for (key, value) in &table {
        let k = key.as_str();
        match k {
            "scenarios" => cfg.scenarios = as_list(k, value)?,
            "approaches" => cfg.approaches = as_list(k, value)?,
            "n" => cfg.n = as_count(k, value)? as usize,
            "replications" => cfg.replications = as_count(k, value)? as usize,
            "master_seed" => cfg.master_seed = as_count(k, value)?,
            "threads" => cfg.threads = as_count(k, value)? as usize,
            "caliper" => cfg.caliper = as_real(k, value)?,
            "caliper_scale" => cfg.caliper_scale = parse_token(k, &as_text(k, value)?)?,
            "alpha_level" => cfg.alpha_level = as_real(k, value)?,
            "variance_outcome" => cfg.variance_outcome = parse_token(k, &as_text(k, value)?)?,
            "link" => cfg.link = parse_token(k, &as_text(k, value)?)?,
            "outdir" => cfg.outdir = PathBuf::from(as_text(k, value)?),
            "per_replication" => cfg.per_replication = as_bool(k, value)?,
            "error_correlation" => cfg.error_correlation = as_real(k, value)?,
            "max_degenerate_rate" => cfg.max_degenerate_rate = as_real(k, value)?,
            "custom_alpha" => cfg.custom_alpha = as_triple(k, value)?,
            "custom_beta" => cfg.custom_beta = as_triple(k, value)?,
            "custom_gamma" => cfg.custom_gamma = as_triple(k, value)?,
            _ => return Err(Error::config(k, "unknown key")),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a configuration file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<StudyConfigFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

fn quoted_list<T: fmt::Display>(items: &[T]) -> String {
    let inner: Vec<String> = items.iter().map(|i| format!("\"{i}\"")).collect();
    format!("[{}]", inner.join(", "))
}

fn triple(v: &[f64; 3]) -> String {
    format!("[{:?}, {:?}, {:?}]", v[0], v[1], v[2])
}

impl StudyConfigFile {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.scenarios.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::config("scenarios", format!("scenario {dup} listed twice")));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.approaches.iter().find(|a| !seen.insert(**a)) {
            return Err(Error::config("approaches", format!("approach {dup} listed twice")));
        }
        if self.outdir.as_os_str().is_empty() {
            return Err(Error::config("outdir", "must not be empty"));
        }
        self.to_plan().map(|_| ())
    }

    pub fn scenario_configs(&self) -> Result<Vec<ScenarioConfig>> {
        self.scenarios
            .iter()
            .map(|id| {
                let mut cfg = match id {
                    ScenarioId::Canonical(k) => scenario_params(*k)?,
                    ScenarioId::Custom => ScenarioConfig {
                        scenario_id: ScenarioId::Custom,
                        alpha: self.custom_alpha,
                        beta: self.custom_beta,
                        gamma: self.custom_gamma,
                        n: self.n,
                        replications: self.replications,
                        error_correlation: 0.0,
                    },
                };
                cfg.n = self.n;
                cfg.replications = self.replications;
                cfg.error_correlation = self.error_correlation;
                Ok(cfg)
            })
            .collect()
    }

    pub fn to_plan(&self) -> Result<StudyPlan> {
        let plan = StudyPlan {
            scenarios: self.scenario_configs()?,
            approaches: self.approaches.clone(),
            variance_outcomes: self.variance_outcome.outcomes(),
            caliper: Caliper {
                sd_multiplier: self.caliper,
                scale: self.caliper_scale,
            },
            link: self.link,
            alpha_level: self.alpha_level,
            master_seed: self.master_seed,
            threads: self.threads,
            max_degenerate_rate: self.max_degenerate_rate,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Serializes every key in the documented schema; parsing the result
    /// yields an equal configuration.
    pub fn to_config_string(&self) -> String {
        let outdir = Value::String(self.outdir.to_string_lossy().into_owned());
        [
            format!("scenarios = {}", quoted_list(&self.scenarios)),
            format!("approaches = {}", quoted_list(&self.approaches)),
            format!("n = {}", self.n),
            format!("replications = {}", self.replications),
            format!("master_seed = {}", self.master_seed),
            format!("threads = {}", self.threads),
            format!("caliper = {:?}", self.caliper),
            format!("caliper_scale = \"{}\"", self.caliper_scale),
            format!("alpha_level = {:?}", self.alpha_level),
            format!("variance_outcome = \"{}\"", self.variance_outcome),
            format!("link = \"{}\"", self.link),
            format!("outdir = {outdir}"),
            format!("per_replication = {}", self.per_replication),
            format!("error_correlation = {:?}", self.error_correlation),
            format!("max_degenerate_rate = {:?}", self.max_degenerate_rate),
            format!("custom_alpha = {}", triple(&self.custom_alpha)),
            format!("custom_beta = {}", triple(&self.custom_beta)),
            format!("custom_gamma = {}", triple(&self.custom_gamma)),
        ]
        .join("\n")
            + "\n"
    }
}
