use prodmc::harness::beta::*;
use prodmc::harness::BetaConfig;
use prodmc::Execution;

#[test]
fn truth_values() {
    assert_eq!(format!("{:.2}", beta_log_truth(10, 1.0, 2.0)), "-10.99");
    assert_eq!(format!("{:.2}", beta_log_truth(50, 1.0, 2.0)), "-54.93");
    assert_eq!(format!("{:.2}", beta_log_truth(150, 1.0, 2.0)), "-164.79");
}

#[test]
fn block_is_schedule_independent() {
    let a = beta_block(3, 0.5, 0.5, 10_000, 9, Execution::Sequential).unwrap();
    let b = beta_block(3, 0.5, 0.5, 10_000, 9, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn small_experiment_csv() {
    let cfg = BetaConfig {
        seed: 3,
        n: 4,
        lambda1: 1.0,
        lambda2: 2.0,
        r_schedule: vec![1000, 2000],
        replicates: 2,
        batches: 10,
    };
    let rows = beta_product_experiment(&cfg, Execution::Parallel).unwrap();
    assert_eq!(rows.len(), 4);
    let mut buf = Vec::new();
    write_beta_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(&BETA_COLUMNS.join(",")));
    assert_eq!(text.lines().count(), 5);
    for r in &rows {
        assert!((r.log_marginal - r.log_truth).abs() < 0.2);
    }
}
