//! Propensity-score-matched group comparisons of variances and Pearson
//! correlation coefficients, and a Monte Carlo study runner that measures
//! type I error, bias and mean squared deviation of those comparisons under
//! confounding and heteroscedasticity.
//!
//! Module map:
//!
//! * [`stats`]: moments, correlation, F and Fisher-z tests, special functions.
//! * [`propensity`]: IRLS fit of the propensity model and score prediction.
//! * [`matching`]: greedy 1:1 caliper matching and balance diagnostics.
//! * [`dgp`]: scenario catalogue and replication generator.
//! * [`simulator`]: per-replication analysis, aggregation, study runner.
//! * [`config`] and [`report`]: study configuration and result files.

pub mod config;
pub mod dgp;
pub mod error;
pub mod matching;
pub mod propensity;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
