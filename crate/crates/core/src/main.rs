use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dnb_psm::config::{parse_config, OutcomeSelector, StudyConfigFile};
use dnb_psm::dgp::ScenarioId;
use dnb_psm::matching::CaliperScale;
use dnb_psm::propensity::Link;
use dnb_psm::report::{render_tables, write_results, StudyReport};
use dnb_psm::simulator::{run_study, Approach};

/// Monte Carlo study of propensity-score-matched variance and correlation
/// comparisons. Flags override values from --config.
#[derive(Debug, Parser)]
#[command(name = "dnb-psm", version)]
struct Cli {
    /// Flat key = value configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Comma-separated scenarios: 1-4 or custom
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    scenario: Option<Vec<ScenarioId>>,
    /// Comma-separated approaches: Unadjusted, PSM1, PSM2, PSM3
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    approach: Option<Vec<Approach>>,
    /// Replications per scenario
    #[arg(long, value_name = "N")]
    reps: Option<usize>,
    /// Subjects per replication
    #[arg(long, value_name = "N")]
    n: Option<usize>,
    /// Master seed
    #[arg(long, value_name = "N", env = "DNB_PSM_SEED")]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Caliper as a multiple of the propensity-score SD
    #[arg(long, value_name = "X")]
    caliper: Option<f64>,
    /// Scale of the caliper and match distances
    #[arg(long, value_name = "probability|logit")]
    caliper_scale: Option<CaliperScale>,
    /// Two-sided significance level
    #[arg(long, value_name = "X")]
    alpha_level: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "PATH")]
    outdir: Option<PathBuf>,
    /// Also write one record per replication
    #[arg(long)]
    per_replication: bool,
    /// Propensity model link
    #[arg(long, value_name = "logit|probit")]
    link: Option<Link>,
    /// Outcome used for the variance comparison
    #[arg(long, value_name = "Y1|Y2|both")]
    variance_outcome: Option<OutcomeSelector>,
    /// Correlation between the Y1 and Y2 errors
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    error_correlation: Option<f64>,
    /// Largest tolerated share of degenerate replications per cell
    #[arg(long, value_name = "X")]
    max_degenerate_rate: Option<f64>,
    /// Exposure coefficients of the custom scenario, e.g. 0.5,0.5,0
    #[arg(long, value_name = "A,B,C", value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    custom_alpha: Option<Vec<f64>>,
    /// Outcome-mean coefficients of the custom scenario
    #[arg(long, value_name = "A,B,C", value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    custom_beta: Option<Vec<f64>>,
    /// Log-SD coefficients of the custom scenario
    #[arg(long, value_name = "A,B,C", value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    custom_gamma: Option<Vec<f64>>,
}

fn triple(v: Vec<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

impl Cli {
    fn apply(self, cfg: &mut StudyConfigFile) {
        macro_rules! set {
            ($($field:ident => $key:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$key = v; })*
            };
        }
        set!(
            scenario => scenarios,
            approach => approaches,
            reps => replications,
            n => n,
            seed => master_seed,
            threads => threads,
            caliper => caliper,
            caliper_scale => caliper_scale,
            alpha_level => alpha_level,
            outdir => outdir,
            link => link,
            variance_outcome => variance_outcome,
            error_correlation => error_correlation,
            max_degenerate_rate => max_degenerate_rate,
        );
        if self.per_replication {
            cfg.per_replication = true;
        }
        if let Some(v) = self.custom_alpha {
            cfg.custom_alpha = triple(v);
        }
        if let Some(v) = self.custom_beta {
            cfg.custom_beta = triple(v);
        }
        if let Some(v) = self.custom_gamma {
            cfg.custom_gamma = triple(v);
        }
    }
}

fn run(cli: Cli) -> dnb_psm::Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => StudyConfigFile::default(),
    };
    cli.apply(&mut cfg);
    cfg.validate()?;

    let plan = cfg.to_plan()?;
    let study = run_study(&plan)?;
    let report = StudyReport::new(&cfg, &study);

    print!("{}", render_tables(&report));
    let per_rep = cfg.per_replication.then_some(&study);
    for path in write_results(&report, per_rep, &cfg.outdir)? {
        eprintln!("wrote {}", path.display());
    }
    eprintln!("elapsed {:.2} s", study.elapsed_seconds);

    for cell in report.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "FAILED scenario {} / {} / {}: {}",
            cell.scenario,
            cell.approach,
            cell.variance_outcome,
            cell.error.as_deref().unwrap_or_default()
        );
    }
    Ok(report.is_success())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
