use prodmc::bml::conjugate::*;
use prodmc::bml::{run_estimator, Batching, Estimator};
use prodmc::quadrature::{expect, gauss_hermite};
use prodmc::stats::BatchScheme;
use approx::assert_relative_eq;
use prodmc::bml::evaluate_draws;
use prodmc::latent::model::normal_log_density;
use prodmc::stats::stream_rng;
use prodmc::{Approach, Execution};

#[test]
fn evidence_matches_quadrature_over_mu() {
    let m = ConjugateNormal::reference();
    let s = m.prior_sd;
    let rule = gauss_hermite(100).unwrap();
    let lik = expect(&rule, |u| {
        let mu = s * u[0];
        let sd = (m.sigma * m.sigma + m.tau * m.tau).sqrt();
        m.y.iter().map(|&y| normal_log_density(y, mu, sd)).sum::<f64>().exp()
    })
    .unwrap();
    assert_relative_eq!(lik.ln(), m.log_evidence(), max_relative = 1e-10);
}

#[test]
fn posterior_is_target_over_evidence() {
    let m = ConjugateNormal::reference();
    for approach in [Approach::Joint, Approach::Marginal] {
        let x = m.sample_posterior(approach, &mut stream_rng(3, 0));
        assert_relative_eq!(
            m.log_target(approach, &x) - m.log_posterior(approach, &x),
            m.log_evidence(),
            max_relative = 1e-12
        );
    }
}

#[test]
fn exact_posterior_gives_constant_ratio() {
    let m = ConjugateNormal::reference();
    let post = m.posterior_draws(Approach::Joint, 1000, 1, Execution::Sequential);
    let g = ExactPosterior {
        model: &m,
        approach: Approach::Joint,
    };
    let ev = evaluate_draws(&post, |x| m.log_target(Approach::Joint, x), &g, 1000, 2, Execution::Parallel);
    let scheme = BatchScheme::new(10, 100).unwrap();
    for est in [Estimator::Rm, Estimator::Bg] {
        let run = run_estimator(&ev, est, Approach::Joint, &scheme, Batching::Contiguous, Execution::Parallel)
            .unwrap();
        assert!((run.report.log_estimate - m.log_evidence()).abs() < 1e-10, "{est}");
        assert!(run.report.mce.unwrap() < 1e-10);
    }
}
