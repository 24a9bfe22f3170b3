//! Oracle suites: every identity the library relies on, checked against an
//! independent computation with a stated tolerance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bml::conjugate::{conjugate_evaluation, ConjugateNormal};
use crate::bml::{run_estimator, Batching, Estimator};
use crate::covariation::{tci_bound_for_block, tci_decomposition, tci_sample, variance_underestimation};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::product::{
    estimator_variances, goodman_product_variance, subset_sums, subset_sums_enumerated, variance_cv_form,
    variance_difference,
};
use crate::quadrature::{expect, gauss_hermite};
use crate::stats::{stream_rng, Approach, BatchScheme, MomentSummary, SampleBlock, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Product,
    Covariation,
    Quadrature,
    Bml,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "product" => Suite::Product,
            "covariation" => Suite::Covariation,
            "quadrature" => Suite::Quadrature,
            "bml" => Suite::Bml,
            other => {
                return Err(Error::config(
                    "suite",
                    format!("unknown suite `{other}` (all, product, covariation, quadrature, bml)"),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    /// Largest observed error, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{} worst={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

type Decomposition = fn(&SampleBlock) -> Result<(f64, Vec<f64>)>;

/// Implementations under test; replaced in mutation tests.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub tci_decomposition: Decomposition,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks {
            tci_decomposition,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn check(suite: &'static str, name: &'static str, worst: f64, tolerance: f64) -> Check {
    Check {
        suite,
        name,
        worst,
        tolerance,
        passed: worst <= tolerance,
    }
}

/// Random moments; a factor has zero mean with probability 1/5.
pub fn random_moments(rng: &mut StreamRng, n: usize) -> MomentSummary {
    let mean = (0..n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-2.0..2.0) })
        .collect();
    let var = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
    MomentSummary::from_moments(mean, var, 0.0).expect("valid random moments")
}

/// Random positive block with correlated columns.
pub fn random_block(rng: &mut StreamRng, rows: usize, cols: usize) -> SampleBlock {
    let values = (0..rows)
        .flat_map(|_| {
            let common: f64 = rng.random_range(0.0..1.0);
            (0..cols)
                .map(|_| 0.2 + common + rng.random_range(0.0..1.0))
                .collect::<Vec<_>>()
        })
        .collect();
    SampleBlock::new(values, rows, cols).expect("finite block")
}

fn product_suite() -> Result<Vec<Check>> {
    let mut rng = stream_rng(0x5eed, 1);
    let (mut enum_err, mut goodman_err, mut cv_err, mut diff_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for trial in 0..1000 {
        let n = 1 + trial % 12;
        let m = random_moments(&mut rng, n);
        let s = subset_sums(&m);
        for (a, b) in s[1..].iter().zip(subset_sums_enumerated(&m)?) {
            enum_err = enum_err.max(rel(*a, b));
        }
        goodman_err = goodman_err.max(rel(goodman_product_variance(&m), s[1..].iter().sum()));
        let r = [2, 10, 50, 1000][trial % 4];
        let vb = estimator_variances(&m, r)?;
        cv_err = cv_err
            .max(rel(variance_cv_form(&m, r, Approach::Joint)?, vb.var_joint))
            .max(rel(variance_cv_form(&m, r, Approach::Marginal)?, vb.var_marginal));
        diff_err = diff_err.max(rel(variance_difference(&m, r)?, vb.var_joint - vb.var_marginal));
    }
    let half = MomentSummary::from_moments(vec![0.5; 2], vec![0.25; 2], 0.0)?;
    let vb = estimator_variances(&half, 100)?;
    let exact = rel(vb.var_joint, 1.875e-3).max(rel(vb.var_marginal, 1.25625e-3));
    Ok(vec![
        check("product", "subset-sums-vs-enumeration", enum_err, 1e-12),
        check("product", "product-variance-vs-subset-sums", goodman_err, 1e-12),
        check("product", "cv-form-vs-moment-form", cv_err, 1e-12),
        check("product", "variance-difference", diff_err, 1e-12),
        check("product", "bernoulli-half-n2-r100", exact, 1e-12),
    ])
}

fn covariation_suite(hooks: &Hooks) -> Result<Vec<Check>> {
    let mut rng = stream_rng(0x5eed, 2);
    let (mut decomp, mut ident, mut bound) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..1000 {
        let n = 2 + trial % 7;
        let rows = 5 + trial % 40;
        let b = random_block(&mut rng, rows, n);
        let direct = tci_sample(&b);
        let (d, _) = (hooks.tci_decomposition)(&b)?;
        decomp = decomp.max(rel(d, direct));
        let (t, i, tci) = variance_underestimation(&b);
        ident = ident.max(rel(t, i - tci * tci));
        let excess = direct.abs() - tci_bound_for_block(&b)?;
        bound = bound.max(excess.max(0.0) / direct.abs().max(f64::MIN_POSITIVE));
    }
    Ok(vec![
        check("covariation", "tci-decomposition", decomp, 1e-10),
        check("covariation", "variance-underestimation", ident, 1e-10),
        check("covariation", "tci-bound", bound, 1e-12),
    ])
}

fn quadrature_suite() -> Result<Vec<Check>> {
    let m4 = expect(&gauss_hermite(10)?, |x| x[0].powi(4))?;
    let mut worst = 0.0f64;
    for n in [3, 7, 15, 21, 41, 64, 100] {
        let r = gauss_hermite(n)?;
        let mut dfact = 1.0;
        for m in 1..=((2 * n - 1) / 2) as i32 {
            dfact *= (2 * m - 1) as f64;
            worst = worst.max(rel(expect(&r, |x| x[0].powi(2 * m))?, dfact));
        }
    }
    Ok(vec![
        check("quadrature", "fourth-moment-order-10", (m4 - 3.0).abs(), 1e-10),
        check("quadrature", "even-moments-to-degree", worst, 1e-9),
    ])
}

/// Each estimator in each approach on the conjugate model; the error is in
/// units of the batch MCE.
pub fn conjugate_checks(draws: usize, batches: usize, seed: u64, exec: Execution) -> Result<Vec<(Estimator, Approach, f64, f64)>> {
    let model = ConjugateNormal::reference();
    let truth = model.log_evidence();
    let scheme = BatchScheme::even(draws, batches)?;
    let mut out = Vec::new();
    for approach in [Approach::Joint, Approach::Marginal] {
        let (ev, _) = conjugate_evaluation(&model, approach, draws, 5000, seed, exec)?;
        for est in Estimator::ALL {
            let run = run_estimator(&ev, est, approach, &scheme, Batching::Contiguous, exec)?;
            let mce = run.report.mce.unwrap_or(f64::NAN);
            out.push((est, approach, run.report.log_estimate - truth, mce));
        }
    }
    Ok(out)
}

fn bml_suite() -> Result<Vec<Check>> {
    let res = conjugate_checks(100_000, 50, 11, Execution::default())?;
    let worst = res
        .iter()
        .map(|&(_, _, err, mce)| if mce > 0.0 { err.abs() / mce } else { f64::INFINITY })
        .fold(0.0, f64::max);
    Ok(vec![check("bml", "conjugate-evidence-in-mce-units", worst, 3.0)])
}

pub fn verify(suite: Suite) -> Result<VerifyReport> {
    verify_with(suite, &Hooks::default())
}

pub fn verify_with(suite: Suite, hooks: &Hooks) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Product {
        checks.extend(product_suite()?);
    }
    if all || suite == Suite::Covariation {
        checks.extend(covariation_suite(hooks)?);
    }
    if all || suite == Suite::Quadrature {
        checks.extend(quadrature_suite()?);
    }
    if all || suite == Suite::Bml {
        checks.extend(bml_suite()?);
    }
    Ok(VerifyReport { checks })
}
