//! Greedy 1:1 nearest-neighbour propensity-score matching without
//! replacement, with a caliper expressed in standard deviations of the
//! matching distance, plus covariate balance diagnostics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propensity::{Confounder, PropensityScores};
use crate::stats::{mean, sample_variance};

/// Scale on which score distances and the caliper SD are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaliperScale {
    #[default]
    Probability,
    /// ln(p / (1 - p)), the linear predictor of a logistic model.
    Logit,
}

impl fmt::Display for CaliperScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaliperScale::Probability => "probability",
            CaliperScale::Logit => "logit",
        })
    }
}

impl FromStr for CaliperScale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "probability" | "prob" => Ok(CaliperScale::Probability),
            "logit" => Ok(CaliperScale::Logit),
            other => Err(format!(
                "unknown caliper scale {other:?}, expected probability or logit"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caliper {
    pub sd_multiplier: f64,
    pub scale: CaliperScale,
}

impl Default for Caliper {
    fn default() -> Self {
        Caliper {
            sd_multiplier: 0.2,
            scale: CaliperScale::Probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(treated_index, control_index)` in the order the pairs were formed.
    pub pairs: Vec<(usize, usize)>,
    /// Sorted indices of every retained subject.
    pub matched_indices: Vec<usize>,
    /// Absolute caliper on the matching scale.
    pub caliper_width: f64,
    pub discarded_treated: usize,
}

impl MatchResult {
    pub fn matched_size(&self) -> usize {
        self.matched_indices.len()
    }
}

/// Matches on the probability scale with caliper `caliper_sd_multiplier`
/// times the SD of all scores.
pub fn nearest_neighbor_match(
    scores: &PropensityScores,
    x: &[bool],
    caliper_sd_multiplier: f64,
) -> Result<MatchResult> {
    match_with_caliper(
        scores,
        x,
        Caliper {
            sd_multiplier: caliper_sd_multiplier,
            scale: CaliperScale::Probability,
        },
    )
}

/// Treated subjects are visited in descending score order (ties by
/// ascending index). Each takes the closest unmatched control (ties by
/// ascending index) if it lies within the caliper, and is discarded
/// otherwise.
pub fn match_with_caliper(
    scores: &PropensityScores,
    x: &[bool],
    caliper: Caliper,
) -> Result<MatchResult> {
    let scores = scores.as_slice();
    if scores.len() != x.len() {
        return Err(Error::Domain(format!(
            "{} scores for {} subjects",
            scores.len(),
            x.len()
        )));
    }
    if !(caliper.sd_multiplier > 0.0) {
        return Err(Error::Domain(format!(
            "caliper multiplier must be positive, got {}",
            caliper.sd_multiplier
        )));
    }
    let mut treated: Vec<usize> = (0..x.len()).filter(|&i| x[i]).collect();
    let controls: Vec<usize> = (0..x.len()).filter(|&i| !x[i]).collect();
    if treated.is_empty() || controls.is_empty() {
        return Err(Error::DegenerateExposure(format!(
            "{} treated and {} control subjects",
            treated.len(),
            controls.len()
        )));
    }

    let distance: Vec<f64> = match caliper.scale {
        CaliperScale::Probability => scores.to_vec(),
        CaliperScale::Logit => scores.iter().map(|p| (p / (1.0 - p)).ln()).collect(),
    };
    let sd = if distance.len() >= 2 {
        sample_variance(&distance)?.sqrt()
    } else {
        0.0
    };
    let caliper_width = caliper.sd_multiplier * sd;

    treated.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut used = vec![false; controls.len()];
    let mut pairs = Vec::with_capacity(treated.len().min(controls.len()));
    let mut discarded_treated = 0;
    for &t in &treated {
        let mut best: Option<(usize, f64)> = None;
        // controls are in ascending index order, so strict < keeps the lowest index on ties
        for (slot, &c) in controls.iter().enumerate() {
            if used[slot] {
                continue;
            }
            let gap = (distance[t] - distance[c]).abs();
            if best.is_none_or(|(_, g)| gap < g) {
                best = Some((slot, gap));
            }
        }
        match best {
            Some((slot, gap)) if gap <= caliper_width => {
                used[slot] = true;
                pairs.push((t, controls[slot]));
            }
            _ => discarded_treated += 1,
        }
    }

    let mut matched_indices: Vec<usize> = pairs.iter().flat_map(|&(t, c)| [t, c]).collect();
    matched_indices.sort_unstable();
    Ok(MatchResult {
        pairs,
        matched_indices,
        caliper_width,
        discarded_treated,
    })
}

/// (mean_treated - mean_control) / sqrt((var_treated + var_control) / 2).
pub fn standardized_mean_diff(treated: &[f64], control: &[f64]) -> Result<f64> {
    let pooled = ((sample_variance(treated)? + sample_variance(control)?) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::DegenerateVariance(
            "zero pooled standard deviation".into(),
        ));
    }
    Ok((mean(treated) - mean(control)) / pooled)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateBalance {
    pub confounder: Confounder,
    pub smd_before: Option<f64>,
    pub smd_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub covariates: Vec<CovariateBalance>,
}

fn split_column(
    z: &[[f64; 3]],
    x: &[bool],
    column: usize,
    keep: impl Fn(usize) -> bool,
) -> (Vec<f64>, Vec<f64>) {
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (i, (row, &t)) in z.iter().zip(x).enumerate() {
        if !keep(i) {
            continue;
        }
        if t {
            treated.push(row[column]);
        } else {
            control.push(row[column]);
        }
    }
    (treated, control)
}

/// SMD of each confounder in the full sample and in the matched subset.
/// Entries are `None` where a group is too small or has no spread.
pub fn balance_report(z: &[[f64; 3]], x: &[bool], matched: &MatchResult) -> BalanceReport {
    let mut keep = vec![false; x.len()];
    for &i in &matched.matched_indices {
        keep[i] = true;
    }
    let covariates = Confounder::ALL
        .iter()
        .map(|&c| {
            let (t, u) = split_column(z, x, c.column(), |_| true);
            let before = standardized_mean_diff(&t, &u).ok();
            let (t, u) = split_column(z, x, c.column(), |i| keep[i]);
            let after = standardized_mean_diff(&t, &u).ok();
            CovariateBalance {
                confounder: c,
                smd_before: before,
                smd_after: after,
            }
        })
        .collect();
    BalanceReport { covariates }
}
