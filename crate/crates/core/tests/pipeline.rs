//! End-to-end checks of one replication's analysis against values worked
//! out independently (40-digit mpmath evaluation of the same arithmetic).

use dnb_psm::dgp::{generate_replication, scenario_params, Dataset};
use dnb_psm::matching::{match_with_caliper, nearest_neighbor_match, Caliper};
use dnb_psm::propensity::{fit_logistic, predict_scores, Confounder, PropensityScores};
use dnb_psm::simulator::{run_replication, AnalysisSettings, Approach};
use dnb_psm::stats::{correlation_diff_test, pearson_r, variance_ratio_test};

const TREATED_SCORES: [f64; 6] = [0.81, 0.66, 0.52, 0.47, 0.33, 0.20];
const CONTROL_SCORES: [f64; 6] = [0.78, 0.70, 0.50, 0.30, 0.25, 0.05];
const Y1: [f64; 12] = [2.1, 3.4, 1.7, 5.0, 2.8, 3.9, 1.2, 2.2, 2.9, 1.5, 3.1, 4.4];
const Y2: [f64; 12] = [1.0, 2.9, 2.2, 4.1, 2.0, 4.5, 0.7, 2.9, 2.1, 1.9, 2.6, 3.0];

fn micro_dataset() -> (Dataset, PropensityScores) {
    let scores: Vec<f64> = TREATED_SCORES.iter().chain(&CONTROL_SCORES).copied().collect();
    let ds = Dataset {
        z: scores.iter().map(|s| [*s, 0.0, 0.0]).collect(),
        x: (0..12).map(|i| i < 6).collect(),
        y1: Y1.to_vec(),
        y2: Y2.to_vec(),
    };
    (ds, PropensityScores::new(scores).unwrap())
}

fn split(ds: &Dataset, idx: &[usize]) -> [Vec<f64>; 4] {
    let pick = |v: &[f64], t: bool| idx.iter().filter(|&&i| ds.x[i] == t).map(|&i| v[i]).collect();
    [pick(&ds.y1, true), pick(&ds.y2, true), pick(&ds.y1, false), pick(&ds.y2, false)]
}

#[test]
fn hand_scored_micro_study() {
    let (ds, scores) = micro_dataset();
    // sd of the 12 scores is 0.24306595937..., so the caliper is 0.0972264
    let m = nearest_neighbor_match(&scores, &ds.x, 0.4).unwrap();
    assert!((m.caliper_width - 0.097_226_383_749_318_26).abs() < 1e-15);
    // 0.47 finds only 0.30 (gap 0.17) and is discarded
    assert_eq!(m.pairs, vec![(0, 6), (1, 7), (2, 8), (4, 9), (5, 10)]);
    assert_eq!(m.discarded_treated, 1);
    assert_eq!(m.matched_indices, vec![0, 1, 2, 4, 5, 6, 7, 8, 9, 10]);

    let [t1, t2, c1, c2] = split(&ds, &m.matched_indices);
    let f = variance_ratio_test(&t1, &c1).unwrap();
    assert!((f.statistic - 1.172_166_427_546_628_2).abs() < 1e-13);
    assert!((f.p_value - 0.881_358_607_078_985_1).abs() < 1e-12);
    let rt = pearson_r(&t1, &t2).unwrap();
    let rc = pearson_r(&c1, &c2).unwrap();
    assert!((rt - 0.813_883_270_967_322_8).abs() < 1e-13);
    assert!((rc - 0.701_137_289_408_607_7).abs() < 1e-13);
    let z = correlation_diff_test(rt, 5, rc, 5).unwrap();
    assert!((z.statistic - 0.268_891_616_611_896_85).abs() < 1e-12);
    assert!((z.p_value - 0.788_013_088_441_738_9).abs() < 1e-12);
}

#[test]
fn unadjusted_micro_study() {
    let (ds, _) = micro_dataset();
    let o = run_replication(&ds, Approach::Unadjusted, &AnalysisSettings::default());
    let e = o.estimates.unwrap();
    assert_eq!(o.matched_size, 12);
    assert!((e.variance_ratio - 1.069_615_663_524_292_7).abs() < 1e-13);
    assert!((e.variance_p - 0.942_928_353_639_328_4).abs() < 1e-12);
    assert!((e.corr_diff - (0.835_913_964_377_512_9 - 0.750_533_389_634_759_5)).abs() < 1e-13);
    assert!((e.corr_p - 0.775_103_246_366_426_3).abs() < 1e-12);
}

#[test]
fn psm_replication_composes_public_steps() {
    let cfg = scenario_params(3).unwrap();
    let settings = AnalysisSettings::default();
    for rep in 0..20 {
        let ds = generate_replication(&cfg, 5, rep);
        for approach in [Approach::Psm1, Approach::Psm2, Approach::Psm3] {
            let got = run_replication(&ds, approach, &settings);

            let fit = fit_logistic(&ds.z, &ds.x, approach.confounders()).unwrap();
            let scores = predict_scores(&fit, &ds.z).unwrap();
            let m = match_with_caliper(&scores, &ds.x, Caliper::default()).unwrap();
            let [t1, t2, c1, c2] = split(&ds, &m.matched_indices);
            let f = variance_ratio_test(&t1, &c1).unwrap();
            let z = correlation_diff_test(
                pearson_r(&t1, &t2).unwrap(),
                t1.len(),
                pearson_r(&c1, &c2).unwrap(),
                c1.len(),
            )
            .unwrap();

            let e = got.estimates.expect("non-degenerate");
            assert_eq!(got.matched_size, m.matched_indices.len());
            assert_eq!(got.matched_size % 2, 0);
            assert_eq!(e.variance_ratio, f.estimate);
            assert_eq!(e.variance_p, f.p_value);
            assert_eq!(e.corr_diff, z.estimate);
            assert_eq!(e.corr_p, z.p_value);
        }
    }
}

#[test]
fn psm_subset_sizes_are_consistent() {
    let cfg = scenario_params(2).unwrap();
    let ds = generate_replication(&cfg, 1, 0);
    let o = run_replication(&ds, Approach::Psm3, &AnalysisSettings::default());
    let fit = fit_logistic(&ds.z, &ds.x, &Confounder::ALL).unwrap();
    assert!(fit.max_score_residual <= 1e-8);
    assert!(o.matched_size <= ds.len());
}
