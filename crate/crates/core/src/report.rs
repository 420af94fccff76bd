//! Study reports: rendered tables and machine-readable result files.
//!
//! Files written by [`write_results`]:
//!
//! * `summary.csv`: one row per cell. Columns, in order: `scenario`,
//!   `approach`, `variance_outcome`, `n`, `ass`, `alpha_error_v`,
//!   `alpha_error_c`, `bias_v`, `bias_c`, `msd_v`, `msd_c`,
//!   `degenerate_count`, `effective_s`, `status`. Reals use the shortest
//!   decimal that round-trips; metric fields are empty for failed cells.
//! * `replications.csv` (optional): one row per cell and replicate with
//!   columns `scenario`, `approach`, `variance_outcome`, `replicate`,
//!   `matched_size`, `variance_ratio`, `variance_p`, `corr_diff`, `corr_p`,
//!   `degenerate`. Degenerate rows have empty estimate fields and a tag.
//! * `tables.txt`: the output of [`render_tables`].
//! * `report.json`: the full [`StudyReport`], including timing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::StudyConfigFile;
use crate::dgp::ScenarioId;
use crate::error::{Error, Result};
use crate::simulator::{Approach, MetricsSummary, StudyRun, VarianceOutcome};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPLICATIONS_FILE: &str = "replications.csv";
pub const TABLES_FILE: &str = "tables.txt";
pub const REPORT_FILE: &str = "report.json";

pub const SUMMARY_HEADER: [&str; 14] = [
    "scenario",
    "approach",
    "variance_outcome",
    "n",
    "ass",
    "alpha_error_v",
    "alpha_error_c",
    "bias_v",
    "bias_c",
    "msd_v",
    "msd_c",
    "degenerate_count",
    "effective_s",
    "status",
];

pub const REPLICATIONS_HEADER: [&str; 10] = [
    "scenario",
    "approach",
    "variance_outcome",
    "replicate",
    "matched_size",
    "variance_ratio",
    "variance_p",
    "corr_diff",
    "corr_p",
    "degenerate",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario: ScenarioId,
    pub approach: Approach,
    pub variance_outcome: VarianceOutcome,
    pub n: usize,
    pub summary: Option<MetricsSummary>,
    pub error: Option<String>,
}

impl CellReport {
    pub fn status(&self) -> String {
        match &self.error {
            None => "ok".to_owned(),
            Some(e) => format!("failed: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub software_version: String,
    pub master_seed: u64,
    pub config: StudyConfigFile,
    pub cells: Vec<CellReport>,
    pub elapsed_seconds: f64,
}

impl StudyReport {
    pub fn new(config: &StudyConfigFile, run: &StudyRun) -> Self {
        StudyReport {
            software_version: env!("CARGO_PKG_VERSION").to_owned(),
            master_seed: config.master_seed,
            config: config.clone(),
            cells: run
                .cells
                .iter()
                .map(|c| CellReport {
                    scenario: c.scenario,
                    approach: c.approach,
                    variance_outcome: c.variance_outcome,
                    n: c.n,
                    summary: c.summary.clone(),
                    error: c.error.clone(),
                })
                .collect(),
            elapsed_seconds: run.elapsed_seconds,
        }
    }

    /// True iff every cell aggregated without error.
    pub fn is_success(&self) -> bool {
        self.cells.iter().all(|c| c.error.is_none() && c.summary.is_some())
    }

    pub fn cell(&self, scenario: ScenarioId, approach: Approach) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.approach == approach)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Aggregation(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Aggregation(e.to_string()))
    }
}

/// Rounds half away from zero to 4 decimals and prints exactly 4 digits.
pub fn format_4dp(value: f64) -> String {
    let scaled = value.abs() * 1e4;
    // treat representation error around a decimal half as an exact half
    let mut units = scaled.floor();
    if scaled - units >= 0.5 - 1e-9 {
        units += 1.0;
    }
    let rounded = (units / 1e4).copysign(value);
    // avoid "-0.0000"
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:.4}")
}

fn render_table(out: &mut String, title: &str, rows: &[&CellReport], metrics: impl Fn(&MetricsSummary) -> [f64; 3]) {
    let _ = writeln!(out, "{title}");
    let header = format!(
        "{:<10}{:<12}{:>9}{:>10}{:>10}{:>10}",
        "Scenario", "Approach", "ASS", "α-error", "Bias", "MSD"
    );
    let rule = "-".repeat(header.chars().count());
    let _ = writeln!(out, "{rule}\n{header}\n{rule}");
    let mut previous: Option<ScenarioId> = None;
    for cell in rows {
        let scenario = if previous == Some(cell.scenario) {
            String::new()
        } else {
            cell.scenario.to_string()
        };
        previous = Some(cell.scenario);
        let (ass, m) = match &cell.summary {
            Some(s) => {
                let ass = if cell.approach.is_matched() { format_4dp(s.ass) } else { "--".into() };
                (ass, metrics(s).map(format_4dp))
            }
            None => ("NA".into(), ["NA".into(), "NA".into(), "NA".into()]),
        };
        let _ = writeln!(
            out,
            "{:<10}{:<12}{:>9}{:>10}{:>10}{:>10}",
            scenario,
            cell.approach.to_string(),
            ass,
            m[0],
            m[1],
            m[2]
        );
    }
    let _ = writeln!(out, "{rule}");
}

/// Renders the variance table (one per variance outcome) and the
/// correlation table, rows ordered by scenario then approach.
pub fn render_tables(report: &StudyReport) -> String {
    let mut outcomes: Vec<VarianceOutcome> = report.cells.iter().map(|c| c.variance_outcome).collect();
    outcomes.sort();
    outcomes.dedup();
    let rows_for = |outcome: VarianceOutcome| {
        let mut rows: Vec<&CellReport> = report
            .cells
            .iter()
            .filter(|c| c.variance_outcome == outcome)
            .collect();
        rows.sort_by_key(|c| (c.scenario, c.approach));
        rows
    };

    let mut out = String::new();
    for &outcome in &outcomes {
        let title = if outcomes.len() > 1 || outcome != VarianceOutcome::Y1 {
            format!("Table 1. Results for variance ({outcome})")
        } else {
            "Table 1. Results for variance".to_owned()
        };
        render_table(&mut out, &title, &rows_for(outcome), |s| [s.alpha_error_v, s.bias_v, s.msd_v]);
        out.push('\n');
    }
    if let Some(&first) = outcomes.first() {
        render_table(
            &mut out,
            "Table 2. Results for Pearson correlation coefficient",
            &rows_for(first),
            |s| [s.alpha_error_c, s.bias_c, s.msd_c],
        );
    }
    out
}

fn real(v: f64) -> String {
    format!("{v}")
}

fn summary_row(cell: &CellReport) -> Vec<String> {
    let mut row = vec![
        cell.scenario.to_string(),
        cell.approach.to_string(),
        cell.variance_outcome.to_string(),
        cell.n.to_string(),
    ];
    match &cell.summary {
        Some(s) => row.extend([
            real(s.ass),
            real(s.alpha_error_v),
            real(s.alpha_error_c),
            real(s.bias_v),
            real(s.bias_c),
            real(s.msd_v),
            real(s.msd_c),
            s.degenerate_count.to_string(),
            s.effective_s.to_string(),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 9)),
    }
    row.push(cell.status());
    row
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes the summary, tables and JSON report to `outdir`, plus the
/// per-replication file when `run` is given. Returns the written paths.
pub fn write_results(report: &StudyReport, run: Option<&StudyRun>, outdir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = Vec::new();

    let path = outdir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
    w.write_record(SUMMARY_HEADER).map_err(csv_error(&path))?;
    for cell in &report.cells {
        w.write_record(summary_row(cell)).map_err(csv_error(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    if let Some(run) = run {
        let path = outdir.join(REPLICATIONS_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
        w.write_record(REPLICATIONS_HEADER).map_err(csv_error(&path))?;
        for cell in &run.cells {
            for (rep, o) in cell.outcomes.iter().enumerate() {
                let mut row = vec![
                    cell.scenario.to_string(),
                    cell.approach.to_string(),
                    cell.variance_outcome.to_string(),
                    rep.to_string(),
                    o.matched_size.to_string(),
                ];
                match o.estimates {
                    Some(e) => row.extend([e.variance_ratio, e.variance_p, e.corr_diff, e.corr_p].map(real)),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
                row.push(o.degenerate.map(|d| d.tag().to_owned()).unwrap_or_default());
                w.write_record(&row).map_err(csv_error(&path))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    let path = outdir.join(TABLES_FILE);
    fs::write(&path, render_tables(report)).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = outdir.join(REPORT_FILE);
    fs::write(&path, report.to_json()? + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn field<T: std::str::FromStr>(path: &Path, name: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::io(path, format!("bad {name} value {value:?}: {e}")))
}

/// Reads a `summary.csv` back into cell records (config echo and timing are
/// not part of that file).
pub fn read_summary(path: &Path) -> Result<Vec<CellReport>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = reader.headers().map_err(csv_error(path))?.clone();
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(Error::io(path, "unexpected summary header"));
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let r = record.map_err(csv_error(path))?;
        let get = |i: usize| r.get(i).unwrap_or("");
        let scenario: ScenarioId = get(0).parse().map_err(|e: String| Error::io(path, e))?;
        let approach: Approach = get(1).parse().map_err(|e: String| Error::io(path, e))?;
        let variance_outcome: VarianceOutcome = get(2).parse().map_err(|e: String| Error::io(path, e))?;
        let n = field(path, "n", get(3))?;
        let summary = if get(4).is_empty() {
            None
        } else {
            Some(MetricsSummary {
                ass: field(path, "ass", get(4))?,
                alpha_error_v: field(path, "alpha_error_v", get(5))?,
                alpha_error_c: field(path, "alpha_error_c", get(6))?,
                bias_v: field(path, "bias_v", get(7))?,
                bias_c: field(path, "bias_c", get(8))?,
                msd_v: field(path, "msd_v", get(9))?,
                msd_c: field(path, "msd_c", get(10))?,
                degenerate_count: field(path, "degenerate_count", get(11))?,
                effective_s: field(path, "effective_s", get(12))?,
            })
        };
        let status = get(13);
        let error = match status {
            "ok" => None,
            s => Some(s.strip_prefix("failed: ").unwrap_or(s).to_owned()),
        };
        cells.push(CellReport {
            scenario,
            approach,
            variance_outcome,
            n,
            summary,
            error,
        });
    }
    Ok(cells)
}
