use prodmc::product::*;
use approx::assert_relative_eq;
use prodmc::logspace::LogSigned;
use prodmc::stats::BatchScheme;
use prodmc::{Approach, Error, MomentSummary, SampleBlock};

fn bernoulli_pair() -> MomentSummary {
    MomentSummary::from_moments(vec![0.5, 0.5], vec![0.25, 0.25], 0.0).unwrap()
}

#[test]
fn hand_enumerated_estimates() {
    let b = SampleBlock::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    assert_relative_eq!(joint_estimate(&b).to_f64(), 7.0, max_relative = 1e-14);
    assert_relative_eq!(marginal_estimate(&b).to_f64(), 6.0, max_relative = 1e-14);
    let ones = SampleBlock::new(vec![1.0; 5], 1, 5).unwrap();
    assert_eq!(joint_estimate(&ones), LogSigned::ONE);
}

#[test]
fn single_column_and_single_row_coincide() {
    let col = SampleBlock::from_columns(&[vec![0.3, -1.2, 4.0, 2.2]]).unwrap();
    assert_eq!(joint_estimate(&col), marginal_estimate(&col));
    let row = SampleBlock::new(vec![0.3, -1.2, 4.0, 2.2], 1, 4).unwrap();
    assert_eq!(joint_estimate(&row), marginal_estimate(&row));
}

#[test]
fn constant_column_factors_out_of_marginal() {
    let b = SampleBlock::from_rows(&[[3.0, 1.0, 2.0], [3.0, 5.0, 0.5], [3.0, 2.0, 1.0]]).unwrap();
    let rest = b.select_columns(&[1, 2]).unwrap();
    assert_relative_eq!(
        marginal_estimate(&b).to_f64(),
        3.0 * marginal_estimate(&rest).to_f64(),
        max_relative = 1e-14
    );
}

#[test]
fn zero_estimates_are_flagged() {
    let b = SampleBlock::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap();
    assert!(joint_estimate(&b).is_zero());
    assert_eq!(joint_estimate(&b).log_abs, f64::NEG_INFINITY);
    let b = SampleBlock::from_rows(&[[-1.0, 2.0], [1.0, 3.0]]).unwrap();
    assert!(marginal_estimate(&b).is_zero());
}

#[test]
fn goodman_examples() {
    let one = MomentSummary::from_moments(vec![2.0], vec![0.7], 0.0).unwrap();
    assert_relative_eq!(goodman_product_variance(&one), 0.7, max_relative = 1e-14);
    assert_relative_eq!(goodman_product_variance(&bernoulli_pair()), 0.1875, max_relative = 1e-14);
    let zeros = MomentSummary::from_moments(vec![0.0; 3], vec![2.0, 3.0, 0.5], 0.0).unwrap();
    assert_relative_eq!(goodman_product_variance(&zeros), 3.0, max_relative = 1e-14);
}

#[test]
fn bernoulli_pair_variances() {
    let vb = estimator_variances(&bernoulli_pair(), 100).unwrap();
    assert_relative_eq!(vb.var_joint, 1.875e-3, max_relative = 1e-12);
    assert_relative_eq!(vb.var_marginal, 1.25625e-3, max_relative = 1e-12);
    assert_relative_eq!(
        variance_difference(&bernoulli_pair(), 100).unwrap(),
        6.1875e-4,
        max_relative = 1e-12
    );
}

#[test]
fn degenerate_sizes() {
    let m = MomentSummary::from_moments(vec![1.0, 2.0, -0.5], vec![0.3, 1.0, 0.2], 0.0).unwrap();
    let vb = estimator_variances(&m, 1).unwrap();
    assert_relative_eq!(vb.var_joint, vb.var_marginal, max_relative = 1e-14);
    assert_eq!(variance_difference(&m, 1).unwrap(), 0.0);
    let one = MomentSummary::from_moments(vec![1.5], vec![0.4], 0.0).unwrap();
    let vb = estimator_variances(&one, 8).unwrap();
    assert_relative_eq!(vb.var_joint, 0.05, max_relative = 1e-14);
    assert_relative_eq!(vb.var_marginal, 0.05, max_relative = 1e-14);
    assert_eq!(variance_difference(&one, 8).unwrap(), 0.0);
    assert!(estimator_variances(&one, 0).is_err());
}

#[test]
fn cv_form_cases() {
    let zeros = MomentSummary::from_moments(vec![0.0; 3], vec![2.0, 3.0, 0.5], 0.0).unwrap();
    assert_relative_eq!(variance_cv_form(&zeros, 10, Approach::Joint).unwrap(), 0.3, max_relative = 1e-14);
    assert_relative_eq!(
        variance_cv_form(&zeros, 10, Approach::Marginal).unwrap(),
        3.0e-3,
        max_relative = 1e-14
    );
    let unit = MomentSummary::from_moments(vec![1.0, 1.0], vec![1.0, 1.0], 0.0).unwrap();
    assert_relative_eq!(variance_cv_form(&unit, 10, Approach::Joint).unwrap(), 0.3, max_relative = 1e-14);
    // Mixed: the indicator drops the −1.
    let mixed = MomentSummary::from_moments(vec![0.0, 2.0], vec![1.5, 4.0], 0.0).unwrap();
    let expected_joint = 1.5 * 4.0 * (1.0 + 1.0) / 10.0;
    assert_relative_eq!(variance_cv_form(&mixed, 10, Approach::Joint).unwrap(), expected_joint, max_relative = 1e-14);
    let vb = estimator_variances(&mixed, 10).unwrap();
    assert_relative_eq!(vb.var_joint, expected_joint, max_relative = 1e-14);
    assert_relative_eq!(
        variance_cv_form(&mixed, 10, Approach::Marginal).unwrap(),
        vb.var_marginal,
        max_relative = 1e-14
    );
}

#[test]
fn enumeration_oracle_matches_and_is_capped() {
    let m = MomentSummary::from_moments(
        vec![0.5, -1.0, 2.0, 0.0, 1.5],
        vec![0.25, 0.1, 3.0, 1.0, 0.0],
        0.0,
    )
    .unwrap();
    let fast = subset_sums(&m);
    let slow = subset_sums_enumerated(&m).unwrap();
    for (a, b) in fast[1..].iter().zip(&slow) {
        assert_relative_eq!(*a, *b, max_relative = 1e-13);
    }
    let big = MomentSummary::from_moments(vec![1.0; 13], vec![1.0; 13], 0.0).unwrap();
    assert!(subset_sums_enumerated(&big).is_err());
}

#[test]
fn required_iterations_examples() {
    let zeros = MomentSummary::from_moments(vec![0.0; 3], vec![1.0, 2.0, 3.0], 0.0).unwrap();
    assert_relative_eq!(required_iterations(10, &zeros).unwrap(), 1000.0, max_relative = 1e-12);
    let unit = MomentSummary::from_moments(vec![1.0, 1.0], vec![1.0, 1.0], 0.0).unwrap();
    assert_relative_eq!(required_iterations(10, &unit).unwrap(), 3.0 / 0.21, max_relative = 1e-12);
    let flat = MomentSummary::from_moments(vec![1.0, 2.0], vec![0.0, 0.0], 0.0).unwrap();
    assert!(matches!(required_iterations(10, &flat), Err(Error::Degenerate(_))));
    assert!(required_iterations(1, &unit).is_err());
}

#[test]
fn required_iterations_equalizes_variances() {
    let m = MomentSummary::from_moments(vec![0.8, 0.0, 1.3], vec![0.5, 0.7, 0.2], 0.0).unwrap();
    let rj = required_iterations(20, &m).unwrap();
    let vj = estimator_variances(&m, rj.round() as usize).unwrap().var_joint;
    let vm = estimator_variances(&m, 20).unwrap().var_marginal;
    assert_relative_eq!(vj, vm, max_relative = 0.5 / rj);
}

#[test]
fn report_over_batches() {
    let b = SampleBlock::from_columns(&[vec![2.0; 20], vec![0.5; 20]]).unwrap();
    let rep = estimate_report(&b, Approach::Joint, &BatchScheme::new(4, 5).unwrap()).unwrap();
    assert_eq!(rep.mce, Some(0.0));
    assert_relative_eq!(rep.value(), 1.0, max_relative = 1e-14);
    let rep = estimate_report(&b, Approach::Marginal, &BatchScheme::new(1, 20).unwrap()).unwrap();
    assert_eq!(rep.mce, None);
}
