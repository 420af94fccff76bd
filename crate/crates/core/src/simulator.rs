//! Study orchestration: per-replication analysis under each adjustment
//! approach, metric aggregation and degenerate-replication accounting.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{generate_replication, Dataset, ScenarioConfig, ScenarioId};
use crate::error::{Error, Result};
use crate::matching::{match_with_caliper, Caliper};
use crate::propensity::{fit_propensity, predict_scores, Confounder, Link};
use crate::stats::{correlation_diff_test, pearson_r, variance_ratio_test};

/// Smallest per-group size at which both tests are run after matching.
pub const MIN_GROUP_SIZE: usize = 5;
pub const DEFAULT_ALPHA_LEVEL: f64 = 0.05;
pub const DEFAULT_MAX_DEGENERATE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Approach {
    Unadjusted,
    #[serde(rename = "PSM1")]
    Psm1,
    #[serde(rename = "PSM2")]
    Psm2,
    #[serde(rename = "PSM3")]
    Psm3,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::Unadjusted, Approach::Psm1, Approach::Psm2, Approach::Psm3];

    /// Confounders entering the propensity model; empty for `Unadjusted`.
    pub fn confounders(self) -> &'static [Confounder] {
        match self {
            Approach::Unadjusted => &[],
            Approach::Psm1 => &[Confounder::Z1],
            Approach::Psm2 => &[Confounder::Z1, Confounder::Z3],
            Approach::Psm3 => &Confounder::ALL,
        }
    }

    pub fn is_matched(self) -> bool {
        self != Approach::Unadjusted
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Unadjusted => "Unadjusted",
            Approach::Psm1 => "PSM1",
            Approach::Psm2 => "PSM2",
            Approach::Psm3 => "PSM3",
        })
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unadjusted" => Ok(Approach::Unadjusted),
            "psm1" => Ok(Approach::Psm1),
            "psm2" => Ok(Approach::Psm2),
            "psm3" => Ok(Approach::Psm3),
            other => Err(format!(
                "unknown approach {other:?}, expected Unadjusted, PSM1, PSM2 or PSM3"
            )),
        }
    }
}

/// Outcome whose group variances are compared by the F test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum VarianceOutcome {
    #[default]
    Y1,
    Y2,
}

impl fmt::Display for VarianceOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceOutcome::Y1 => "Y1",
            VarianceOutcome::Y2 => "Y2",
        })
    }
}

impl FromStr for VarianceOutcome {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "y1" => Ok(VarianceOutcome::Y1),
            "y2" => Ok(VarianceOutcome::Y2),
            other => Err(format!("unknown outcome {other:?}, expected Y1 or Y2")),
        }
    }
}

/// Everything `run_replication` needs besides the data and the approach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub caliper: Caliper,
    pub link: Link,
    pub variance_outcome: VarianceOutcome,
    pub min_group_size: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            caliper: Caliper::default(),
            link: Link::Logit,
            variance_outcome: VarianceOutcome::Y1,
            min_group_size: MIN_GROUP_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateReason {
    /// No treated or no control subjects.
    DegenerateExposure,
    /// Propensity fit did not converge or diverged.
    Separation,
    /// Matching formed no pairs.
    ZeroPairs,
    /// A group fell below the minimum size for testing.
    SmallGroup,
    /// An outcome is constant within a group.
    ConstantOutcome,
    /// A within-group correlation is undefined or equal to +/-1.
    DegenerateCorrelation,
}

impl DegenerateReason {
    pub fn tag(self) -> &'static str {
        match self {
            DegenerateReason::DegenerateExposure => "degenerate_exposure",
            DegenerateReason::Separation => "separation",
            DegenerateReason::ZeroPairs => "zero_pairs",
            DegenerateReason::SmallGroup => "small_group",
            DegenerateReason::ConstantOutcome => "constant_outcome",
            DegenerateReason::DegenerateCorrelation => "degenerate_correlation",
        }
    }

    fn from_error(err: &Error) -> Self {
        match err {
            Error::DegenerateExposure(_) => DegenerateReason::DegenerateExposure,
            Error::Separation(_) | Error::InvalidFit(_) => DegenerateReason::Separation,
            Error::DegenerateVariance(_) => DegenerateReason::ConstantOutcome,
            Error::InsufficientData(_) => DegenerateReason::SmallGroup,
            _ => DegenerateReason::DegenerateCorrelation,
        }
    }
}

impl fmt::Display for DegenerateReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DegenerateReason {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [
            DegenerateReason::DegenerateExposure,
            DegenerateReason::Separation,
            DegenerateReason::ZeroPairs,
            DegenerateReason::SmallGroup,
            DegenerateReason::ConstantOutcome,
            DegenerateReason::DegenerateCorrelation,
        ]
        .into_iter()
        .find(|r| r.tag() == s)
        .ok_or_else(|| format!("unknown degeneracy tag {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    /// var(exposed) / var(unexposed).
    pub variance_ratio: f64,
    pub variance_p: f64,
    /// r(exposed) - r(unexposed) for the (Y1, Y2) pair.
    pub corr_diff: f64,
    pub corr_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    /// Treated plus control subjects analysed; n for `Unadjusted`, 0 if
    /// the replication failed before a sample was formed.
    pub matched_size: usize,
    pub estimates: Option<Estimates>,
    pub degenerate: Option<DegenerateReason>,
}

impl ReplicationOutcome {
    fn degenerate(matched_size: usize, reason: DegenerateReason) -> Self {
        ReplicationOutcome {
            matched_size,
            estimates: None,
            degenerate: Some(reason),
        }
    }
}

/// Indices of the analysed subjects for `approach`.
fn analysis_sample(ds: &Dataset, approach: Approach, settings: &AnalysisSettings) -> Result<Vec<usize>> {
    if !approach.is_matched() {
        return Ok((0..ds.len()).collect());
    }
    let fit = fit_propensity(&ds.z, &ds.x, approach.confounders(), settings.link)?;
    let scores = predict_scores(&fit, &ds.z)?;
    let matched = match_with_caliper(&scores, &ds.x, settings.caliper)?;
    Ok(matched.matched_indices)
}

fn test_groups(ds: &Dataset, sample: &[usize], settings: &AnalysisSettings) -> std::result::Result<Estimates, DegenerateReason> {
    let outcome = match settings.variance_outcome {
        VarianceOutcome::Y1 => &ds.y1,
        VarianceOutcome::Y2 => &ds.y2,
    };
    let (mut v_t, mut v_c) = (Vec::new(), Vec::new());
    let (mut t1, mut t2, mut c1, mut c2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &i in sample {
        if ds.x[i] {
            v_t.push(outcome[i]);
            t1.push(ds.y1[i]);
            t2.push(ds.y2[i]);
        } else {
            v_c.push(outcome[i]);
            c1.push(ds.y1[i]);
            c2.push(ds.y2[i]);
        }
    }
    if v_t.is_empty() || v_c.is_empty() {
        return Err(DegenerateReason::DegenerateExposure);
    }
    if v_t.len() < settings.min_group_size || v_c.len() < settings.min_group_size {
        return Err(DegenerateReason::SmallGroup);
    }
    let run = || -> Result<Estimates> {
        let var = variance_ratio_test(&v_t, &v_c)?;
        let r_t = pearson_r(&t1, &t2)?;
        let r_c = pearson_r(&c1, &c2)?;
        let corr = correlation_diff_test(r_t, t1.len(), r_c, c1.len())?;
        Ok(Estimates {
            variance_ratio: var.estimate,
            variance_p: var.p_value,
            corr_diff: corr.estimate,
            corr_p: corr.p_value,
        })
    };
    run().map_err(|e| DegenerateReason::from_error(&e))
}

/// Analyses one dataset under one approach. Failures of the propensity fit,
/// the matcher or either test are captured as a degeneracy tag.
pub fn run_replication(ds: &Dataset, approach: Approach, settings: &AnalysisSettings) -> ReplicationOutcome {
    if ds.validate().is_err() {
        return ReplicationOutcome::degenerate(0, DegenerateReason::DegenerateExposure);
    }
    let sample = match analysis_sample(ds, approach, settings) {
        Ok(s) => s,
        Err(e) => return ReplicationOutcome::degenerate(0, DegenerateReason::from_error(&e)),
    };
    if sample.is_empty() {
        return ReplicationOutcome::degenerate(0, DegenerateReason::ZeroPairs);
    }
    match test_groups(ds, &sample, settings) {
        Ok(est) => ReplicationOutcome {
            matched_size: sample.len(),
            estimates: Some(est),
            degenerate: None,
        },
        Err(reason) => ReplicationOutcome::degenerate(sample.len(), reason),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// Mean analysed sample size over non-degenerate replications.
    pub ass: f64,
    pub alpha_error_v: f64,
    pub alpha_error_c: f64,
    pub bias_v: f64,
    pub bias_c: f64,
    pub msd_v: f64,
    pub msd_c: f64,
    pub degenerate_count: usize,
    pub effective_s: usize,
}

/// Rejection rates at `alpha_level`, bias and mean squared deviation
/// against the null values (variance ratio 1, correlation difference 0),
/// over non-degenerate outcomes taken in the given order.
pub fn aggregate(outcomes: &[ReplicationOutcome], alpha_level: f64) -> Result<MetricsSummary> {
    let mut count = 0usize;
    let mut size = 0.0;
    let (mut rej_v, mut rej_c) = (0usize, 0usize);
    let (mut dev_v, mut dev_c, mut sq_v, mut sq_c) = (0.0, 0.0, 0.0, 0.0);
    for est in outcomes.iter().filter_map(|o| o.estimates.map(|e| (o.matched_size, e))) {
        let (matched_size, e) = est;
        count += 1;
        size += matched_size as f64;
        rej_v += usize::from(e.variance_p < alpha_level);
        rej_c += usize::from(e.corr_p < alpha_level);
        let dv = e.variance_ratio - 1.0;
        let dc = e.corr_diff;
        dev_v += dv;
        dev_c += dc;
        sq_v += dv * dv;
        sq_c += dc * dc;
    }
    if count == 0 {
        return Err(Error::Aggregation(format!(
            "all {} replications are degenerate",
            outcomes.len()
        )));
    }
    let s = count as f64;
    Ok(MetricsSummary {
        ass: size / s,
        alpha_error_v: rej_v as f64 / s,
        alpha_error_c: rej_c as f64 / s,
        bias_v: dev_v / s,
        bias_c: dev_c / s,
        msd_v: sq_v / s,
        msd_c: sq_c / s,
        degenerate_count: outcomes.len() - count,
        effective_s: count,
    })
}

/// Full description of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub scenarios: Vec<ScenarioConfig>,
    pub approaches: Vec<Approach>,
    pub variance_outcomes: Vec<VarianceOutcome>,
    pub caliper: Caliper,
    pub link: Link,
    pub alpha_level: f64,
    pub master_seed: u64,
    pub threads: usize,
    pub max_degenerate_rate: f64,
}

impl StudyPlan {
    /// Canonical scenarios 1-4, all approaches, Y1 variance outcome.
    pub fn canonical(master_seed: u64) -> Self {
        StudyPlan {
            scenarios: (1..=4).map(|id| crate::dgp::scenario_params(id).expect("canonical id")).collect(),
            approaches: Approach::ALL.to_vec(),
            variance_outcomes: vec![VarianceOutcome::Y1],
            caliper: Caliper::default(),
            link: Link::Logit,
            alpha_level: DEFAULT_ALPHA_LEVEL,
            master_seed,
            threads: 1,
            max_degenerate_rate: DEFAULT_MAX_DEGENERATE_RATE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::config("scenarios", "at least one scenario is required"));
        }
        if self.approaches.is_empty() {
            return Err(Error::config("approaches", "at least one approach is required"));
        }
        if self.variance_outcomes.is_empty() {
            return Err(Error::config("variance_outcome", "at least one outcome is required"));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        if !(self.caliper.sd_multiplier > 0.0 && self.caliper.sd_multiplier.is_finite()) {
            return Err(Error::config("caliper", "must be a positive number"));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::config("alpha_level", "must lie in (0, 1)"));
        }
        if self.threads == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.max_degenerate_rate) {
            return Err(Error::config("max_degenerate_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn settings(&self, variance_outcome: VarianceOutcome) -> AnalysisSettings {
        AnalysisSettings {
            caliper: self.caliper,
            link: self.link,
            variance_outcome,
            min_group_size: MIN_GROUP_SIZE,
        }
    }
}

/// Results for one (scenario, approach, variance outcome) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub scenario: ScenarioId,
    pub n: usize,
    pub approach: Approach,
    pub variance_outcome: VarianceOutcome,
    /// Per-replication outcomes in replicate order.
    pub outcomes: Vec<ReplicationOutcome>,
    pub summary: Option<MetricsSummary>,
    /// Set when aggregation failed or too many replications were degenerate.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRun {
    pub cells: Vec<Cell>,
    pub elapsed_seconds: f64,
}

/// Runs every scenario of `plan`. Each replicate's dataset is generated once
/// and analysed under every approach, so approach columns are paired.
pub fn run_study(plan: &StudyPlan) -> Result<StudyRun> {
    plan.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;

    let combos: Vec<(Approach, VarianceOutcome)> = plan
        .approaches
        .iter()
        .flat_map(|&a| plan.variance_outcomes.iter().map(move |&v| (a, v)))
        .collect();

    let mut cells = Vec::new();
    for scenario in &plan.scenarios {
        let per_replicate: Vec<Vec<ReplicationOutcome>> = pool.install(|| {
            (0..scenario.replications)
                .into_par_iter()
                .map(|rep| {
                    let ds = generate_replication(scenario, plan.master_seed, rep as u64);
                    combos
                        .iter()
                        .map(|&(approach, outcome)| run_replication(&ds, approach, &plan.settings(outcome)))
                        .collect()
                })
                .collect()
        });

        for (k, &(approach, variance_outcome)) in combos.iter().enumerate() {
            let outcomes: Vec<ReplicationOutcome> = per_replicate.iter().map(|row| row[k]).collect();
            let (summary, error) = match aggregate(&outcomes, plan.alpha_level) {
                Ok(m) => {
                    let rate = m.degenerate_count as f64 / outcomes.len() as f64;
                    let error = (rate > plan.max_degenerate_rate).then(|| {
                        format!(
                            "degenerate rate {rate} exceeds limit {}",
                            plan.max_degenerate_rate
                        )
                    });
                    (Some(m), error)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(Cell {
                scenario: scenario.scenario_id,
                n: scenario.n,
                approach,
                variance_outcome,
                outcomes,
                summary,
                error,
            });
        }
    }
    Ok(StudyRun {
        cells,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimated(matched_size: usize, variance_ratio: f64, variance_p: f64) -> ReplicationOutcome {
        ReplicationOutcome {
            matched_size,
            estimates: Some(Estimates {
                variance_ratio,
                variance_p,
                corr_diff: 0.0,
                corr_p: 0.5,
            }),
            degenerate: None,
        }
    }

    #[test]
    fn alpha_error_counts_rejections() {
        let m = aggregate(&[estimated(100, 1.0, 0.01), estimated(100, 1.0, 0.20)], 0.05).unwrap();
        assert_eq!(m.alpha_error_v, 0.5);
        assert_eq!(m.alpha_error_c, 0.0);
    }

    #[test]
    fn bias_and_msd_arithmetic() {
        let m = aggregate(&[estimated(80, 1.2, 0.5), estimated(60, 0.8, 0.5)], 0.05).unwrap();
        assert!(m.bias_v.abs() < 1e-15);
        assert!((m.msd_v - 0.04).abs() < 1e-15);
        assert_eq!(m.ass, 70.0);
    }

    #[test]
    fn degenerates_are_excluded_and_counted() {
        let outcomes = [
            estimated(100, 1.5, 0.01),
            ReplicationOutcome::degenerate(0, DegenerateReason::ZeroPairs),
        ];
        let m = aggregate(&outcomes, 0.05).unwrap();
        assert_eq!((m.effective_s, m.degenerate_count), (1, 1));
        assert_eq!(m.alpha_error_v, 1.0);
        let all_bad = [ReplicationOutcome::degenerate(0, DegenerateReason::Separation)];
        assert!(matches!(aggregate(&all_bad, 0.05), Err(Error::Aggregation(_))));
    }

    #[test]
    fn all_exposed_dataset_is_degenerate() {
        let ds = Dataset {
            z: vec![[0.0; 3]; 10],
            x: vec![true; 10],
            y1: (0..10).map(f64::from).collect(),
            y2: (0..10).map(|i| f64::from(i * i)).collect(),
        };
        for approach in Approach::ALL {
            let o = run_replication(&ds, approach, &AnalysisSettings::default());
            assert_eq!(o.degenerate, Some(DegenerateReason::DegenerateExposure));
            assert!(o.estimates.is_none());
        }
    }

    #[test]
    fn identical_groups_give_unit_ratio() {
        let y1 = [1.0, 3.0, 2.0, 7.0, 5.0, 4.0];
        let mut ds = Dataset { z: vec![], x: vec![], y1: vec![], y2: vec![] };
        for (k, &v) in y1.iter().enumerate() {
            for &t in &[true, false] {
                ds.z.push([k as f64, 0.0, 0.0]);
                ds.x.push(t);
                ds.y1.push(v);
                ds.y2.push(v * v + if t { 0.5 } else { 0.0 });
            }
        }
        let o = run_replication(&ds, Approach::Unadjusted, &AnalysisSettings::default());
        let e = o.estimates.unwrap();
        assert_eq!(e.variance_ratio, 1.0);
        assert!((e.variance_p - 1.0).abs() < 1e-12);
        assert_eq!(o.matched_size, 12);
    }

    #[test]
    fn approach_subsets() {
        assert!(Approach::Unadjusted.confounders().is_empty());
        assert_eq!(Approach::Psm1.confounders(), &[Confounder::Z1]);
        assert_eq!(Approach::Psm2.confounders(), &[Confounder::Z1, Confounder::Z3]);
        assert_eq!(Approach::Psm3.confounders().len(), 3);
        assert_eq!("psm2".parse::<Approach>().unwrap(), Approach::Psm2);
    }

    #[test]
    fn degeneracy_tags_round_trip() {
        for r in [DegenerateReason::ZeroPairs, DegenerateReason::DegenerateCorrelation] {
            assert_eq!(r.tag().parse::<DegenerateReason>().unwrap(), r);
        }
    }
}
