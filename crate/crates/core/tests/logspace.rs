use prodmc::logspace::*;

#[test]
fn lse_handles_large_magnitudes() {
    let v = log_sum_exp(&[-2000.0, -2000.0]);
    assert!((v - (-2000.0 + 2f64.ln())).abs() < 1e-12);
    assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
}

#[test]
fn log1p_exp_is_stable() {
    assert!((log1p_exp(800.0) - 800.0).abs() < 1e-12);
    assert!(log1p_exp(-800.0) >= 0.0);
    assert!((log1p_exp(0.0) - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn signed_sum_matches_linear() {
    let xs = [3.5, -1.25, 0.0, -7.0, 2.0];
    let ls: Vec<_> = xs.iter().map(|&x| LogSigned::from_f64(x)).collect();
    let s = LogSigned::sum(&ls).to_f64();
    assert!((s - xs.iter().sum::<f64>()).abs() < 1e-12);
    let m = LogSigned::mean(&ls).to_f64();
    assert!((m - xs.iter().sum::<f64>() / 5.0).abs() < 1e-12);
}

#[test]
fn exact_cancellation_is_zero() {
    let a = LogSigned::from_f64(2.0);
    assert!(a.sub(a).is_zero());
}

#[test]
fn products_track_sign() {
    let a = LogSigned::from_f64(-3.0);
    let b = LogSigned::from_f64(4.0);
    assert!(((a * b).to_f64() + 12.0).abs() < 1e-12);
    assert!(((a / b).to_f64() + 0.75).abs() < 1e-12);
    assert!((a * LogSigned::ZERO).is_zero());
}
