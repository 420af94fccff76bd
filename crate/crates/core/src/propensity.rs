//! Propensity-score model Pr(X = 1 | Z) fitted by iteratively reweighted
//! least squares (Newton / Fisher scoring) with step halving.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::{normal_cdf, normal_pdf, normal_sf};

pub const MAX_ITERATIONS: usize = 25;
pub const MAX_HALVINGS: usize = 10;
pub const SCORE_TOLERANCE: f64 = 1e-8;
pub const SEPARATION_BOUND: f64 = 30.0;

/// One of the three measured confounders, indexing a column of the
/// confounder matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Confounder {
    Z1,
    Z2,
    Z3,
}

impl Confounder {
    pub const ALL: [Confounder; 3] = [Confounder::Z1, Confounder::Z2, Confounder::Z3];

    pub fn column(self) -> usize {
        match self {
            Confounder::Z1 => 0,
            Confounder::Z2 => 1,
            Confounder::Z3 => 2,
        }
    }
}

impl fmt::Display for Confounder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z{}", self.column() + 1)
    }
}

/// Link function of the binary-response model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logit,
    Probit,
}

impl Link {
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Logit => 1.0 / (1.0 + (-eta).exp()),
            Link::Probit => normal_cdf(eta),
        }
    }

    /// `(ln mu, ln(1 - mu))` without cancellation in either tail.
    fn log_probs(self, eta: f64) -> (f64, f64) {
        match self {
            Link::Logit => (-softplus(-eta), -softplus(eta)),
            Link::Probit => (normal_cdf(eta).ln(), normal_sf(eta).ln()),
        }
    }

    /// Per-observation score multiplier and Fisher weight at `eta`.
    fn score_and_weight(self, eta: f64) -> (f64, f64, f64) {
        match self {
            Link::Logit => {
                let mu = self.inverse(eta);
                (mu, 1.0, mu * (1.0 - mu))
            }
            Link::Probit => {
                let mu = normal_cdf(eta);
                let one_minus = normal_sf(eta);
                let dens = normal_pdf(eta);
                let var = (mu * one_minus).max(f64::MIN_POSITIVE);
                (mu, dens / var, dens * dens / var)
            }
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
        })
    }
}

impl FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            other => Err(format!("unknown link {other:?}, expected logit or probit")),
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityFit {
    /// Intercept followed by one slope per included confounder (linear-predictor units).
    pub coefficients: Vec<f64>,
    pub included: Vec<Confounder>,
    pub link: Link,
    pub converged: bool,
    pub iterations: usize,
    pub max_score_residual: f64,
}

impl PropensityFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    pub fn linear_predictor(&self, row: &[f64; 3]) -> f64 {
        linear_predictor(&self.coefficients, &self.included, row)
    }
}

/// Estimated propensity scores, aligned with dataset row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityScores(Vec<f64>);

impl PropensityScores {
    /// Wraps externally supplied scores; every value must lie strictly in (0, 1).
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(Error::Domain(format!(
                "propensity score {bad} outside (0, 1)"
            )));
        }
        Ok(PropensityScores(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn linear_predictor(coef: &[f64], included: &[Confounder], row: &[f64; 3]) -> f64 {
    coef[0]
        + included
            .iter()
            .zip(&coef[1..])
            .map(|(c, b)| b * row[c.column()])
            .sum::<f64>()
}

fn design_row(included: &[Confounder], row: &[f64; 3], out: &mut [f64]) {
    out[0] = 1.0;
    for (slot, c) in out[1..].iter_mut().zip(included) {
        *slot = row[c.column()];
    }
}

fn deviance(coef: &[f64], included: &[Confounder], z: &[[f64; 3]], x: &[bool], link: Link) -> f64 {
    let mut dev = 0.0;
    for (row, &treated) in z.iter().zip(x) {
        let (ln_mu, ln_one_minus) = link.log_probs(linear_predictor(coef, included, row));
        dev -= 2.0 * if treated { ln_mu } else { ln_one_minus };
    }
    dev
}

/// Score vector and expected information at `coef`.
fn score_and_information(
    coef: &[f64],
    included: &[Confounder],
    z: &[[f64; 3]],
    x: &[bool],
    link: Link,
) -> (Vec<f64>, Vec<f64>) {
    let k = coef.len();
    let mut score = vec![0.0; k];
    let mut info = vec![0.0; k * k];
    let mut h = vec![0.0; k];
    for (row, &treated) in z.iter().zip(x) {
        design_row(included, row, &mut h);
        let (mu, mult, weight) = link.score_and_weight(linear_predictor(coef, included, row));
        let resid = (if treated { 1.0 } else { 0.0 }) - mu;
        for i in 0..k {
            score[i] += resid * mult * h[i];
            for j in 0..=i {
                info[i * k + j] += weight * h[i] * h[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            info[j * k + i] = info[i * k + j];
        }
    }
    (score, info)
}

/// Solves `a * v = b` for symmetric positive-definite `a` (row-major, k x k).
fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut y = vec![0.0; k];
    for i in 0..k {
        let s: f64 = (0..i).map(|p| l[i * k + p] * y[p]).sum();
        y[i] = (b[i] - s) / l[i * k + i];
    }
    let mut v = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|p| l[p * k + i] * v[p]).sum();
        v[i] = (y[i] - s) / l[i * k + i];
    }
    Some(v)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, s| m.max(s.abs()))
}

/// Maximum-likelihood logistic regression of `x` on an intercept plus the
/// `included` columns of `z`.
pub fn fit_logistic(z: &[[f64; 3]], x: &[bool], included: &[Confounder]) -> Result<PropensityFit> {
    fit_propensity(z, x, included, Link::Logit)
}

/// Maximum-likelihood binary regression with the given link, started at the
/// zero vector. Converged when every score component is within
/// [`SCORE_TOLERANCE`] of zero.
pub fn fit_propensity(
    z: &[[f64; 3]],
    x: &[bool],
    included: &[Confounder],
    link: Link,
) -> Result<PropensityFit> {
    if z.len() != x.len() {
        return Err(Error::Domain(format!(
            "confounder rows ({}) and exposure length ({}) differ",
            z.len(),
            x.len()
        )));
    }
    if included.is_empty() {
        return Err(Error::Domain("propensity model needs at least one confounder".into()));
    }
    let treated = x.iter().filter(|t| **t).count();
    if treated == 0 || treated == x.len() {
        return Err(Error::DegenerateExposure(format!(
            "{treated} of {} subjects exposed",
            x.len()
        )));
    }

    let mut coef = vec![0.0; included.len() + 1];
    let mut dev = deviance(&coef, included, z, x, link);
    let mut iterations = 0;
    loop {
        let (score, info) = score_and_information(&coef, included, z, x, link);
        let residual = max_abs(&score);
        if residual <= SCORE_TOLERANCE {
            return Ok(PropensityFit {
                coefficients: coef,
                included: included.to_vec(),
                link,
                converged: true,
                iterations,
                max_score_residual: residual,
            });
        }
        if iterations == MAX_ITERATIONS {
            return Err(Error::Separation(format!(
                "no convergence after {MAX_ITERATIONS} iterations (score residual {residual:e})"
            )));
        }
        let step = cholesky_solve(&info, &score)
            .ok_or_else(|| Error::Separation("singular information matrix".into()))?;

        let mut scale = 1.0;
        let mut candidate: Vec<f64> = coef.iter().zip(&step).map(|(c, s)| c + s).collect();
        let mut cand_dev = deviance(&candidate, included, z, x, link);
        for _ in 0..MAX_HALVINGS {
            if cand_dev.is_finite() && cand_dev <= dev {
                break;
            }
            scale *= 0.5;
            candidate = coef.iter().zip(&step).map(|(c, s)| c + scale * s).collect();
            cand_dev = deviance(&candidate, included, z, x, link);
        }
        coef = candidate;
        dev = cand_dev;
        iterations += 1;

        if let Some(big) = coef.iter().find(|c| !c.is_finite() || c.abs() > SEPARATION_BOUND) {
            return Err(Error::Separation(format!(
                "coefficient {big} exceeds bound {SEPARATION_BOUND}"
            )));
        }
    }
}

/// Scores `link^-1(intercept + slopes . z_i)` for every row of `z`.
pub fn predict_scores(fit: &PropensityFit, z: &[[f64; 3]]) -> Result<PropensityScores> {
    if !fit.converged {
        return Err(Error::InvalidFit("propensity fit did not converge".into()));
    }
    if fit.coefficients.len() != fit.included.len() + 1 {
        return Err(Error::InvalidFit(format!(
            "{} coefficients for {} confounders",
            fit.coefficients.len(),
            fit.included.len()
        )));
    }
    let lo = f64::MIN_POSITIVE;
    let hi = 1.0 - f64::EPSILON / 2.0;
    Ok(PropensityScores(
        z.iter()
            .map(|row| fit.link.inverse(fit.linear_predictor(row)).clamp(lo, hi))
            .collect(),
    ))
}
