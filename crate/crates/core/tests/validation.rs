mod common;

use approx::assert_abs_diff_eq;
use common::{hky, two_state};
use ctmc_bridge::validation::*;
use ctmc_bridge::RandomStream;

#[test]
fn two_sample_statistic_by_hand() {
    // 2x2 table with counts well above the pooling minimum
    let t = chi_square_two_sample(&[30, 70], &[50, 50]);
    // expected 40/60 in each row
    let by_hand = 2.0 * (100.0 / 40.0 + 100.0 / 60.0);
    assert_abs_diff_eq!(t.statistic, by_hand, epsilon = 1e-12);
    assert_eq!(t.dof, 1);
    // chi-square(1) survival via erfc
    assert_abs_diff_eq!(t.p_value, statrs::function::erf::erfc((by_hand / 2.0).sqrt()), epsilon = 1e-12);
}

#[test]
fn two_sample_pools_sparse_tail() {
    // pooled tail 5 + 3 + 1 < 10 merges into the second bin
    let t = chi_square_two_sample(&[50, 50, 3, 1, 1], &[50, 50, 2, 2]);
    assert_eq!(t.dof, 1);
    assert!(t.p_value > 0.5);
}

#[test]
fn goodness_of_fit_by_hand() {
    let t = chi_square_goodness_of_fit(&[25, 25, 50], &[0.25, 0.25, 0.5]);
    assert_abs_diff_eq!(t.statistic, 0.0);
    let t = chi_square_goodness_of_fit(&[30, 20, 50], &[0.25, 0.25, 0.5]);
    assert_abs_diff_eq!(t.statistic, 2.0, epsilon = 1e-12);
    assert_eq!(t.dof, 2);
}

#[test]
fn standard_errors() {
    let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
    assert_abs_diff_eq!(m, 2.5);
    assert_abs_diff_eq!(se, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
    let (r, _) = ratio_and_se(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]);
    assert_abs_diff_eq!(r, 2.0);
}

#[test]
fn two_state_chain_passes() {
    let report =
        validate_matrix("two-state", &two_state(), &[1.0], &ValidationConfig::default(), &RandomStream::new(1))
            .unwrap();
    assert_eq!(report.cells, 4);
    let failures: Vec<_> = report.failures().collect();
    assert!(failures.is_empty(), "{failures:?}");
    for family in [CheckFamily::CrossSampler, CheckFamily::AnalyticLaw, CheckFamily::Recursions] {
        assert!(report.family(family).count() > 0);
    }
}

#[test]
fn corrupted_uniformization_is_caught() {
    let cfg = ValidationConfig { corrupt_uniformization: true, ..Default::default() };
    for q in [two_state(), hky(true)] {
        let report = validate_matrix("corrupted", &q, &[1.0], &cfg, &RandomStream::new(1)).unwrap();
        assert!(!report.passed());
    }
}

#[test]
fn validation_is_deterministic() {
    let cfg = ValidationConfig { paths: 500, ..Default::default() };
    let run = || validate_matrix("hky", &hky(true), &[0.5], &cfg, &RandomStream::new(9)).unwrap();
    let (x, y) = (run(), run());
    let stats = |r: &ValidationReport| r.checks.iter().map(|c| c.statistic.to_bits()).collect::<Vec<_>>();
    assert_eq!(stats(&x), stats(&y));
}
