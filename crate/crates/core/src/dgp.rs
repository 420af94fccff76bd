//! Data-generating process: three standard-normal confounders, a probit
//! exposure and two outcomes that depend on the confounders only, with
//! log-linear heteroscedastic errors.
//!
//! Draw order within a replication is fixed: Z row-major, then one uniform
//! per subject for X, then the Y1 errors, then the Y2 errors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Substream;
use crate::stats::special::normal_cdf;

pub const CANONICAL_N: usize = 100;
pub const CANONICAL_REPLICATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScenarioId {
    Canonical(u8),
    Custom,
}

impl ScenarioId {
    /// Substream key; custom scenarios use key 0.
    pub fn stream_key(self) -> u64 {
        match self {
            ScenarioId::Canonical(id) => id as u64,
            ScenarioId::Custom => 0,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioId::Canonical(id) => write!(f, "{id}"),
            ScenarioId::Custom => f.write_str("custom"),
        }
    }
}

impl TryFrom<String> for ScenarioId {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ScenarioId> for String {
    fn from(id: ScenarioId) -> String {
        id.to_string()
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("custom") {
            return Ok(ScenarioId::Custom);
        }
        match s.parse::<u8>() {
            Ok(id @ 1..=4) => Ok(ScenarioId::Canonical(id)),
            _ => Err(format!("unknown scenario {s:?}, expected 1-4 or custom")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario_id: ScenarioId,
    /// Exposure model coefficients: Pr(X = 1 | z) = Phi(alpha . z).
    pub alpha: [f64; 3],
    /// Outcome mean coefficients.
    pub beta: [f64; 3],
    /// Log-SD coefficients: sd(eps | z) = exp(gamma . z).
    pub gamma: [f64; 3],
    pub n: usize,
    pub replications: usize,
    /// Correlation between the standardized Y1 and Y2 errors.
    #[serde(default)]
    pub error_correlation: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::config("n", format!("must be at least 10, got {}", self.n)));
        }
        if self.replications < 1 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        for (key, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::config(key, "coefficients must be finite"));
            }
        }
        if !(self.error_correlation.abs() < 1.0) {
            return Err(Error::config(
                "error_correlation",
                format!("must lie in (-1, 1), got {}", self.error_correlation),
            ));
        }
        Ok(())
    }
}

/// Parameters of the four canonical scenarios (n = 100, S = 10000).
///
/// 1: no confounding, homoscedastic. 2: confounding, homoscedastic.
/// 3: confounding, heteroscedastic. 4: no confounding, heteroscedastic.
pub fn scenario_params(id: u8) -> Result<ScenarioConfig> {
    let (confounded, heteroscedastic) = match id {
        1 => (false, false),
        2 => (true, false),
        3 => (true, true),
        4 => (false, true),
        _ => {
            return Err(Error::config(
                "scenarios",
                format!("scenario id must be 1-4, got {id}"),
            ))
        }
    };
    let ab = if confounded { 0.5 } else { 0.0 };
    let g = if heteroscedastic { 0.1 } else { 0.0 };
    Ok(ScenarioConfig {
        scenario_id: ScenarioId::Canonical(id),
        alpha: [ab; 3],
        beta: [ab; 3],
        gamma: [g; 3],
        n: CANONICAL_N,
        replications: CANONICAL_REPLICATIONS,
        error_correlation: 0.0,
    })
}

/// One replication's raw draws, row-aligned across fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub z: Vec<[f64; 3]>,
    pub x: Vec<bool>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn treated_count(&self) -> usize {
        self.x.iter().filter(|t| **t).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if self.z.len() != n || self.y1.len() != n || self.y2.len() != n {
            return Err(Error::Domain("dataset fields are not row-aligned".into()));
        }
        let finite = self.z.iter().flatten().chain(&self.y1).chain(&self.y2).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("dataset contains non-finite values".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Draws replication `replicate_index` of `cfg`. The result depends only on
/// `(master_seed, cfg.scenario_id, replicate_index)` and the parameters.
pub fn generate_replication(cfg: &ScenarioConfig, master_seed: u64, replicate_index: u64) -> Dataset {
    let n = cfg.n;
    let mut stream = Substream::new(master_seed, cfg.scenario_id.stream_key(), replicate_index);

    let z: Vec<[f64; 3]> = (0..n)
        .map(|_| [stream.next_normal(), stream.next_normal(), stream.next_normal()])
        .collect();
    let x: Vec<bool> = z
        .iter()
        .map(|row| stream.next_uniform() < normal_cdf(dot(&cfg.alpha, row)))
        .collect();
    let e1: Vec<f64> = (0..n).map(|_| stream.next_normal()).collect();
    let e2: Vec<f64> = (0..n).map(|_| stream.next_normal()).collect();

    let rho = cfg.error_correlation;
    let rho_c = (1.0 - rho * rho).sqrt();
    let mut y1 = Vec::with_capacity(n);
    let mut y2 = Vec::with_capacity(n);
    for (i, row) in z.iter().enumerate() {
        let mean = dot(&cfg.beta, row);
        let sd = dot(&cfg.gamma, row).exp();
        y1.push(mean + sd * e1[i]);
        y2.push(mean + sd * (rho * e1[i] + rho_c * e2[i]));
    }
    Dataset { z, x, y1, y2 }
}
