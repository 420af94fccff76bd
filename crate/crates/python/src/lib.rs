//! Python bindings for the dnb-psm simulation library.

use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dnb_psm::config::parse_config_str;
use dnb_psm::dgp::{self, ScenarioId};
use dnb_psm::matching::{Caliper, CaliperScale};
use dnb_psm::propensity::{self, Confounder, Link};
use dnb_psm::report::{render_tables, StudyReport};
use dnb_psm::simulator::{self, AnalysisSettings, Approach, VarianceOutcome};
use dnb_psm::{stats, Error};

fn to_py(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: FromStr>(value: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

fn confounder(name: &str) -> PyResult<Confounder> {
    Confounder::ALL
        .into_iter()
        .find(|c| format!("{c:?}").eq_ignore_ascii_case(name))
        .ok_or_else(|| PyValueError::new_err(format!("unknown confounder {name:?}")))
}

#[pyclass(name = "TestResult", frozen, from_py_object)]
#[derive(Clone)]
struct PyTestResult {
    #[pyo3(get)]
    statistic: f64,
    #[pyo3(get)]
    p_value: f64,
    #[pyo3(get)]
    df: Option<(f64, f64)>,
    #[pyo3(get)]
    estimate: f64,
}

#[pymethods]
impl PyTestResult {
    fn __repr__(&self) -> String {
        format!("TestResult(statistic={}, p_value={})", self.statistic, self.p_value)
    }
}

impl From<stats::TestResult> for PyTestResult {
    fn from(t: stats::TestResult) -> Self {
        PyTestResult {
            statistic: t.statistic,
            p_value: t.p_value,
            df: t.df,
            estimate: t.estimate,
        }
    }
}

#[pyfunction]
fn sample_variance(values: Vec<f64>) -> PyResult<f64> {
    stats::sample_variance(&values).map_err(to_py)
}

#[pyfunction]
fn pearson_r(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    stats::pearson_r(&x, &y).map_err(to_py)
}

#[pyfunction]
fn dnb_statistic(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    stats::dnb_statistic(&x, &y).map_err(to_py)
}

#[pyfunction]
fn fisher_z(r: f64) -> PyResult<f64> {
    stats::fisher_z(r).map_err(to_py)
}

#[pyfunction]
fn variance_ratio_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<PyTestResult> {
    stats::variance_ratio_test(&a, &b).map(Into::into).map_err(to_py)
}

#[pyfunction]
fn correlation_diff_test(r_a: f64, n_a: usize, r_b: f64, n_b: usize) -> PyResult<PyTestResult> {
    stats::correlation_diff_test(r_a, n_a, r_b, n_b).map(Into::into).map_err(to_py)
}

#[pyclass(name = "PropensityFit", frozen, from_py_object)]
#[derive(Clone)]
struct PyPropensityFit {
    inner: propensity::PropensityFit,
}

#[pymethods]
impl PyPropensityFit {
    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    #[getter]
    fn confounders(&self) -> Vec<String> {
        self.inner.included.iter().map(|c| format!("{c:?}")).collect()
    }

    #[getter]
    fn link(&self) -> String {
        self.inner.link.to_string()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn max_score_residual(&self) -> f64 {
        self.inner.max_score_residual
    }

    fn predict(&self, z: Vec<[f64; 3]>) -> PyResult<Vec<f64>> {
        propensity::predict_scores(&self.inner, &z)
            .map(|s| s.into_inner())
            .map_err(to_py)
    }
}

/// Fit the exposure model on the named confounders ("Z1", "Z2", "Z3").
#[pyfunction]
#[pyo3(signature = (z, x, confounders, link = "logit"))]
fn fit_propensity(z: Vec<[f64; 3]>, x: Vec<bool>, confounders: Vec<String>, link: &str) -> PyResult<PyPropensityFit> {
    let included = confounders.iter().map(|c| confounder(c)).collect::<PyResult<Vec<_>>>()?;
    let link: Link = parse(link)?;
    propensity::fit_propensity(&z, &x, &included, link)
        .map(|inner| PyPropensityFit { inner })
        .map_err(to_py)
}

#[pyclass(name = "MatchResult", frozen, from_py_object)]
#[derive(Clone)]
struct PyMatchResult {
    #[pyo3(get)]
    pairs: Vec<(usize, usize)>,
    #[pyo3(get)]
    matched_indices: Vec<usize>,
    #[pyo3(get)]
    caliper_width: f64,
    #[pyo3(get)]
    discarded_treated: usize,
}

/// Greedy 1:1 nearest-neighbour caliper matching without replacement.
#[pyfunction]
#[pyo3(signature = (scores, x, caliper = 0.2, scale = "probability"))]
fn match_scores(scores: Vec<f64>, x: Vec<bool>, caliper: f64, scale: &str) -> PyResult<PyMatchResult> {
    let scores = propensity::PropensityScores::new(scores).map_err(to_py)?;
    let caliper = Caliper {
        sd_multiplier: caliper,
        scale: parse(scale)?,
    };
    let m = dnb_psm::matching::match_with_caliper(&scores, &x, caliper).map_err(to_py)?;
    Ok(PyMatchResult {
        pairs: m.pairs,
        matched_indices: m.matched_indices,
        caliper_width: m.caliper_width,
        discarded_treated: m.discarded_treated,
    })
}

#[pyclass(name = "ScenarioConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PyScenarioConfig {
    inner: dgp::ScenarioConfig,
}

#[pymethods]
impl PyScenarioConfig {
    #[new]
    #[pyo3(signature = (alpha, beta, gamma, n = 100, replications = 10_000, error_correlation = 0.0))]
    fn new(
        alpha: [f64; 3],
        beta: [f64; 3],
        gamma: [f64; 3],
        n: usize,
        replications: usize,
        error_correlation: f64,
    ) -> PyResult<Self> {
        let inner = dgp::ScenarioConfig {
            scenario_id: ScenarioId::Custom,
            alpha,
            beta,
            gamma,
            n,
            replications,
            error_correlation,
        };
        inner.validate().map_err(to_py)?;
        Ok(PyScenarioConfig { inner })
    }

    #[getter]
    fn scenario_id(&self) -> String {
        self.inner.scenario_id.to_string()
    }

    #[getter]
    fn alpha(&self) -> [f64; 3] {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> [f64; 3] {
        self.inner.beta
    }

    #[getter]
    fn gamma(&self) -> [f64; 3] {
        self.inner.gamma
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn replications(&self) -> usize {
        self.inner.replications
    }

    fn __repr__(&self) -> String {
        format!("ScenarioConfig({:?})", self.inner)
    }
}

#[pyfunction]
fn scenario_params(id: u8) -> PyResult<PyScenarioConfig> {
    dgp::scenario_params(id).map(|inner| PyScenarioConfig { inner }).map_err(to_py)
}

#[pyclass(name = "Dataset", frozen, from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: dgp::Dataset,
}

#[pymethods]
impl PyDataset {
    #[getter]
    fn z(&self) -> Vec<[f64; 3]> {
        self.inner.z.clone()
    }

    #[getter]
    fn x(&self) -> Vec<bool> {
        self.inner.x.clone()
    }

    #[getter]
    fn y1(&self) -> Vec<f64> {
        self.inner.y1.clone()
    }

    #[getter]
    fn y2(&self) -> Vec<f64> {
        self.inner.y2.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn generate_replication(config: &PyScenarioConfig, master_seed: u64, replicate_index: u64) -> PyDataset {
    PyDataset {
        inner: dgp::generate_replication(&config.inner, master_seed, replicate_index),
    }
}

#[pyclass(name = "ReplicationOutcome", frozen, from_py_object)]
#[derive(Clone)]
struct PyReplicationOutcome {
    inner: simulator::ReplicationOutcome,
}

#[pymethods]
impl PyReplicationOutcome {
    #[getter]
    fn matched_size(&self) -> usize {
        self.inner.matched_size
    }

    #[getter]
    fn degenerate(&self) -> Option<&'static str> {
        self.inner.degenerate.map(|d| d.tag())
    }

    /// Dict of variance_ratio, variance_p, corr_diff and corr_p, or None.
    #[getter]
    fn estimates<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        let Some(e) = &self.inner.estimates else {
            return Ok(None);
        };
        let d = PyDict::new(py);
        d.set_item("variance_ratio", e.variance_ratio)?;
        d.set_item("variance_p", e.variance_p)?;
        d.set_item("corr_diff", e.corr_diff)?;
        d.set_item("corr_p", e.corr_p)?;
        Ok(Some(d))
    }
}

#[pyfunction]
#[pyo3(signature = (dataset, approach, caliper = 0.2, caliper_scale = "probability", link = "logit", variance_outcome = "Y1"))]
fn run_replication(
    dataset: &PyDataset,
    approach: &str,
    caliper: f64,
    caliper_scale: &str,
    link: &str,
    variance_outcome: &str,
) -> PyResult<PyReplicationOutcome> {
    let approach: Approach = parse(approach)?;
    let settings = AnalysisSettings {
        caliper: Caliper {
            sd_multiplier: caliper,
            scale: parse::<CaliperScale>(caliper_scale)?,
        },
        link: parse(link)?,
        variance_outcome: parse::<VarianceOutcome>(variance_outcome)?,
        ..AnalysisSettings::default()
    };
    Ok(PyReplicationOutcome {
        inner: simulator::run_replication(&dataset.inner, approach, &settings),
    })
}

#[pyclass(name = "MetricsSummary", frozen, from_py_object)]
#[derive(Clone)]
struct PyMetricsSummary {
    #[pyo3(get)]
    ass: f64,
    #[pyo3(get)]
    alpha_error_v: f64,
    #[pyo3(get)]
    alpha_error_c: f64,
    #[pyo3(get)]
    bias_v: f64,
    #[pyo3(get)]
    bias_c: f64,
    #[pyo3(get)]
    msd_v: f64,
    #[pyo3(get)]
    msd_c: f64,
    #[pyo3(get)]
    degenerate_count: usize,
    #[pyo3(get)]
    effective_s: usize,
}

#[pyfunction]
#[pyo3(signature = (outcomes, alpha_level = 0.05))]
fn aggregate(outcomes: Vec<PyReplicationOutcome>, alpha_level: f64) -> PyResult<PyMetricsSummary> {
    let outcomes: Vec<_> = outcomes.into_iter().map(|o| o.inner).collect();
    let m = simulator::aggregate(&outcomes, alpha_level).map_err(to_py)?;
    Ok(PyMetricsSummary {
        ass: m.ass,
        alpha_error_v: m.alpha_error_v,
        alpha_error_c: m.alpha_error_c,
        bias_v: m.bias_v,
        bias_c: m.bias_c,
        msd_v: m.msd_v,
        msd_c: m.msd_c,
        degenerate_count: m.degenerate_count,
        effective_s: m.effective_s,
    })
}

#[pyclass(name = "StudyReport", frozen)]
struct PyStudyReport {
    inner: StudyReport,
}

#[pymethods]
impl PyStudyReport {
    #[getter]
    fn is_success(&self) -> bool {
        self.inner.is_success()
    }

    #[getter]
    fn elapsed_seconds(&self) -> f64 {
        self.inner.elapsed_seconds
    }

    fn tables(&self) -> String {
        render_tables(&self.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }
}

/// Run a full study from configuration text in the CLI's key = value format.
/// The GIL is released while replications run.
#[pyfunction]
#[pyo3(signature = (config = ""))]
fn run_study(py: Python<'_>, config: &str) -> PyResult<PyStudyReport> {
    let cfg = parse_config_str(config).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    let plan = cfg.to_plan().map_err(to_py)?;
    let run = py.detach(|| simulator::run_study(&plan)).map_err(to_py)?;
    Ok(PyStudyReport {
        inner: StudyReport::new(&cfg, &run),
    })
}

#[pymodule]
fn dnb_psm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Add every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTestResult>()?;
    m.add_class::<PyPropensityFit>()?;
    m.add_class::<PyMatchResult>()?;
    m.add_class::<PyScenarioConfig>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyReplicationOutcome>()?;
    m.add_class::<PyMetricsSummary>()?;
    m.add_class::<PyStudyReport>()?;
    m.add_function(wrap_pyfunction!(sample_variance, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(dnb_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_z, m)?)?;
    m.add_function(wrap_pyfunction!(variance_ratio_test, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_diff_test, m)?)?;
    m.add_function(wrap_pyfunction!(fit_propensity, m)?)?;
    m.add_function(wrap_pyfunction!(match_scores, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_params, m)?)?;
    m.add_function(wrap_pyfunction!(generate_replication, m)?)?;
    m.add_function(wrap_pyfunction!(run_replication, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
