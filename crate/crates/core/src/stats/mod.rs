//! Moments, correlation and the two group-comparison tests.
//!
//! Everything here is a pure function of its arguments. Degenerate inputs
//! (constant samples, |r| = 1, too few observations) come back as typed
//! errors rather than NaN so callers can count them.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use special::{normal_cdf, normal_quantile};

/// Outcome of a two-group test.
///
/// `estimate` is the variance ratio for the F test and the correlation
/// difference for the z test. `df` is present only for the F test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: Option<(f64, f64)>,
    pub estimate: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance, sum of squared deviations over `len - 1`.
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "variance needs at least 2 values, got {}",
            values.len()
        )));
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(ss / (values.len() - 1) as f64)
}

fn correlation(x: &[f64], y: &[f64], min_len: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "correlation needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_len {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least {min_len} pairs, got {}",
            x.len()
        )));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateCorrelation(
            "constant sample has no correlation".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation of paired samples (at least 3 pairs).
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    correlation(x, y, 3)
}

/// Dynamic network biomarker statistic: sd(x) * pearson_r(x, y).
pub fn dnb_statistic(x: &[f64], y: &[f64]) -> Result<f64> {
    let r = correlation(x, y, 2)?;
    Ok(sample_variance(x)?.sqrt() * r)
}

/// Fisher z-transformation, atanh(r).
pub fn fisher_z(r: f64) -> Result<f64> {
    if r.is_nan() || r.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "fisher z requires |r| < 1, got {r}"
        )));
    }
    Ok(r.abs().atanh().copysign(r))
}

/// Two-sided F test of equal variances, statistic var(a) / var(b).
///
/// The p-value is `2 * min(P(F <= f), P(F >= f))` capped at 1, each tail
/// evaluated directly from the incomplete beta function.
pub fn variance_ratio_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let var_a = sample_variance(a)?;
    let var_b = sample_variance(b)?;
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::DegenerateVariance(
            "zero variance in a compared group".into(),
        ));
    }
    let d1 = (a.len() - 1) as f64;
    let d2 = (b.len() - 1) as f64;
    let statistic = var_a / var_b;
    // The two-sided p-value is symmetric in the groups; evaluating it in one
    // canonical orientation makes p(a, b) and p(b, a) bit-identical.
    let (num, den) = if (var_a, d1) >= (var_b, d2) {
        ((var_a, d1), (var_b, d2))
    } else {
        ((var_b, d2), (var_a, d1))
    };
    let (lower, upper) = special::f_distribution_tails(num.0 / den.0, num.1, den.1);
    let p_value = (2.0 * lower.min(upper)).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic,
        p_value,
        df: Some((d1, d2)),
        estimate: statistic,
    })
}

/// Fisher z comparison of correlations from two independent groups.
pub fn correlation_diff_test(r_a: f64, n_a: usize, r_b: f64, n_b: usize) -> Result<TestResult> {
    if n_a <= 3 || n_b <= 3 {
        return Err(Error::InsufficientData(format!(
            "correlation comparison needs n > 3 per group, got {n_a} and {n_b}"
        )));
    }
    let z_a = fisher_z(r_a)?;
    let z_b = fisher_z(r_b)?;
    let se = (1.0 / (n_a - 3) as f64 + 1.0 / (n_b - 3) as f64).sqrt();
    let statistic = (z_a - z_b) / se;
    // 2 * (1 - Phi(|z|)) == erfc(|z| / sqrt 2)
    let p_value = special::erfc(statistic.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic,
        p_value,
        df: None,
        estimate: r_a - r_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn variance_examples() {
        assert_eq!(sample_variance(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(sample_variance(&[0.0, 2.0]).unwrap(), 2.0);
        assert!((sample_variance(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(matches!(sample_variance(&[1.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson_r(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        // covariance-formula oracle (mpmath, 40 digits): 0.98198050606196571569...
        let r = pearson_r(&x, &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.981_980_506_061_965_7).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateCorrelation(_))
        ));
        assert!(matches!(
            pearson_r(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::InsufficientData(_))
        ));
        assert!(pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dnb_examples() {
        let v = dnb_statistic(&[0.0, 2.0], &[0.0, 2.0]).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        assert!(dnb_statistic(&[1.0; 4], &[1.0, 2.0, 3.0, 5.0]).is_err());
        let v = dnb_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((v - 0.981_980_506_061_965_7).abs() < 1e-15);
    }

    #[test]
    fn fisher_z_examples() {
        assert_eq!(fisher_z(0.0).unwrap(), 0.0);
        assert_eq!(fisher_z(-0.3).unwrap(), -fisher_z(0.3).unwrap());
        assert!((fisher_z(0.5).unwrap() - 0.549_306_144_334_054_8).abs() < 1e-15);
        assert!(fisher_z(1.0).is_err());
        assert!(fisher_z(-1.5).is_err());
    }

    #[test]
    fn variance_ratio_identical_groups() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let t = variance_ratio_test(&a, &a).unwrap();
        assert_eq!(t.statistic, 1.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        assert_eq!(t.df, Some((3.0, 3.0)));
    }

    #[test]
    fn variance_ratio_reference_example() {
        // df (4, 4), f = 1/4: I_{0.2}(2, 2) = 0.104 exactly, so p = 0.208
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let t = variance_ratio_test(&a, &b).unwrap();
        assert!((t.statistic - 0.25).abs() < 1e-15);
        assert!((t.p_value - 0.208).abs() < 1e-10);
        let swapped = variance_ratio_test(&b, &a).unwrap();
        assert!((swapped.statistic - 4.0).abs() < 1e-14);
        assert!((swapped.p_value - t.p_value).abs() < 1e-14);
    }

    #[test]
    fn variance_ratio_degenerate() {
        assert!(matches!(
            variance_ratio_test(&[2.0, 2.0, 2.0], &[1.0, 2.0]),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn correlation_diff_examples() {
        let t = correlation_diff_test(0.4, 30, 0.4, 30).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.df, None);

        // mpmath: z = 1.16240838067232530778, p = 0.24506962067854013962
        let t = correlation_diff_test(0.5, 50, 0.3, 50).unwrap();
        assert!((t.statistic - 1.162_408_380_672_325_3).abs() < 1e-13);
        assert!((t.p_value - 0.245_069_620_678_540_14).abs() < 1e-13);
        assert!((t.estimate - 0.2).abs() < 1e-15);

        let s = correlation_diff_test(0.3, 50, 0.5, 50).unwrap();
        assert_eq!(s.statistic, -t.statistic);
        assert_eq!(s.p_value, t.p_value);
    }

    #[test]
    fn correlation_diff_errors() {
        assert!(matches!(
            correlation_diff_test(0.1, 3, 0.2, 10),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            correlation_diff_test(1.0, 10, 0.2, 10),
            Err(Error::Domain(_))
        ));
    }

    fn nonconstant_pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0..100.0f64, n),
                prop::collection::vec(-100.0..100.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            (x, y) in nonconstant_pairs(),
            scale in 0.1..10.0f64,
            shift in -50.0..50.0f64,
        ) {
            let r = pearson_r(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            let r2 = pearson_r(&xs, &y).unwrap();
            prop_assert!((r - r2).abs() < 1e-12);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            prop_assert!((pearson_r(&x, &neg).unwrap() + r).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r));
        }

        #[test]
        fn variance_ratio_symmetry((a, b) in nonconstant_pairs(), extra in prop::collection::vec(-5.0..5.0f64, 0..10)) {
            let mut b = b;
            b.extend(extra);
            let ab = variance_ratio_test(&a, &b).unwrap();
            let ba = variance_ratio_test(&b, &a).unwrap();
            prop_assert_eq!(ab.p_value, ba.p_value);
            prop_assert!((ab.statistic * ba.statistic - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
            prop_assert_eq!(ab.estimate, ab.statistic);
        }

        #[test]
        fn fisher_z_inverts_tanh(t in -5.0..5.0f64) {
            prop_assert!((fisher_z(t.tanh()).unwrap() - t).abs() < 1e-12);
        }

        #[test]
        fn correlation_p_in_unit_interval(
            ra in -0.999..0.999f64, rb in -0.999..0.999f64,
            na in 4usize..2000, nb in 4usize..2000,
        ) {
            let t = correlation_diff_test(ra, na, rb, nb).unwrap();
            prop_assert!((0.0..=1.0).contains(&t.p_value));
            prop_assert!(t.statistic.is_finite());
            prop_assert!((-2.0..=2.0).contains(&t.estimate));
        }

        #[test]
        fn correlation_p_decreases_with_gap(base in 0.05..0.45f64, n in 10usize..300) {
            // both correlations stay in (0, 1); widen the gap on a fixed grid
            let mut last = f64::INFINITY;
            for step in 0..10 {
                let gap = 0.05 * step as f64;
                let p = correlation_diff_test(base + gap, n, base, n).unwrap().p_value;
                if step > 0 {
                    prop_assert!(p < last, "gap {gap}: {p} !< {last}");
                }
                last = p;
            }
        }

        #[test]
        fn quantile_inverts_cdf(p in 1e-8..(1.0 - 1e-8)) {
            let x = normal_quantile(p).unwrap();
            prop_assert!((normal_cdf(x) - p).abs() < 1e-10);
        }

        #[test]
        fn cdf_symmetry(x in -8.0..8.0f64) {
            prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }
}
