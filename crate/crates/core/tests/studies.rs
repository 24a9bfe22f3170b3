use std::sync::OnceLock;

use prodmc::bml::conjugate::{conjugate_evaluation, ConjugateNormal};
use prodmc::bml::{batch_report, run_estimator, Batching, Estimator};
use prodmc::harness::beta::beta_block;
use prodmc::harness::{gllvm_experiment, write_diagnostics_csv, write_gllvm_csv, GllvmConfig, GllvmStudy, Settings};
use prodmc::stats::{moments, BatchScheme};
use prodmc::{Approach, Execution};

fn desk_study() -> &'static GllvmStudy {
    static STUDY: OnceLock<GllvmStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let cfg = GllvmConfig::from_settings(&Settings::default()).unwrap();
        gllvm_experiment(&cfg, Execution::Parallel).unwrap()
    })
}

#[test]
fn bg_cases_vary_less_than_bh() {
    let s = desk_study();
    let bh = s.diagnostics(Estimator::Bh).numerator.cv_median;
    let bg = s.diagnostics(Estimator::Bg).numerator.cv_median;
    assert!(bg < bh, "BG median CV {bg} vs BH {bh}");
}

#[test]
fn rm_covariation_exceeds_bh_net() {
    let s = desk_study();
    let rm = s.diagnostics(Estimator::Rm).tci.net_log_effect.abs();
    let bh = s.diagnostics(Estimator::Bh).tci.net_log_effect.abs();
    assert!(rm > bh, "|RM| {rm} vs |BH net| {bh}");
}

#[test]
fn desk_csv_shapes() {
    let s = desk_study();
    let mut buf = Vec::new();
    write_gllvm_csv(s, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "approach,estimator,pooled_log_estimate,batch_mean,mce,batch_index,batch_log_estimate"
    );
    assert_eq!(text.lines().count(), 1 + 6 * 25);
    let mut buf = Vec::new();
    write_diagnostics_csv(s, &mut buf).unwrap();
    // RM has no denominator block.
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 5);
}

#[test]
fn desk_study_is_reproducible() {
    let cfg = GllvmConfig::from_settings(&Settings::default()).unwrap();
    let again = gllvm_experiment(&cfg, Execution::Sequential).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_gllvm_csv(desk_study(), &mut a).unwrap();
    write_gllvm_csv(&again, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn full_protocol_shape() {
    let s = Settings {
        p: Some(6),
        cases: Some(600),
        k: Some(2),
        burn_in: Some(10_000),
        thin: Some(10),
        kept: Some(50_000),
        batches: Some(50),
        ..Default::default()
    };
    let cfg = GllvmConfig::from_settings(&s).unwrap();
    assert_eq!(cfg.scheme, BatchScheme::new(50, 1000).unwrap());
    assert_eq!(cfg.mwg(0).unwrap().kept(), 50_000);
}

#[test]
fn conjugate_estimators_agree() {
    let model = ConjugateNormal::reference();
    let scheme = BatchScheme::even(100_000, 50).unwrap();
    for approach in [Approach::Joint, Approach::Marginal] {
        let (ev, _) = conjugate_evaluation(&model, approach, 100_000, 5000, 4, Execution::Parallel).unwrap();
        let rows: Vec<_> = Estimator::ALL
            .iter()
            .map(|&e| batch_report(&run_estimator(&ev, e, approach, &scheme, Batching::Contiguous, Execution::Parallel).unwrap()))
            .collect();
        for a in 0..3 {
            for b in a + 1..3 {
                let d = (rows[a].pooled_log_estimate - rows[b].pooled_log_estimate).abs();
                let tol = 3.0 * (rows[a].mce.unwrap() + rows[b].mce.unwrap());
                assert!(d < tol, "{approach}: {} vs {}: {d} > {tol}", rows[a].estimator, rows[b].estimator);
            }
        }
    }
}

#[test]
fn fifty_by_thousand_partition() {
    let model = ConjugateNormal::reference();
    let (ev, _) = conjugate_evaluation(&model, Approach::Marginal, 50_000, 2000, 9, Execution::Parallel).unwrap();
    let scheme = BatchScheme::new(50, 1000).unwrap();
    let run = run_estimator(&ev, Estimator::Bg, Approach::Marginal, &scheme, Batching::Contiguous, Execution::Parallel)
        .unwrap();
    assert_eq!(run.batch_log_estimates.len(), 50);
    let row = batch_report(&run);
    assert!(row.mce.unwrap() > 0.0);
    assert!(row.pooled_log_estimate.is_finite() && row.batch_mean.is_finite());
}

#[test]
fn beta_one_two_factor_cv() {
    let block = beta_block(3, 1.0, 2.0, 200_000, 4, Execution::Parallel).unwrap();
    let m = moments(&block, 0.0).unwrap();
    for cv in m.cv.iter().flatten() {
        assert!((cv - 0.5f64.sqrt()).abs() < 0.01, "{cv}");
    }
}
