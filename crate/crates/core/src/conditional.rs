//! Nested Monte Carlo for integrands that factorize given an outer variable:
//! `E[Πᵢ φᵢ(uᵢ, v)]` with the `uᵢ` conditionally independent given `v`.
//!
//! The joint estimator draws `(u, v)` together. The marginal estimator draws
//! `v`, averages each factor over `R₂` inner draws (or uses exact
//! conditional means), and multiplies the averages.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::logspace::LogSigned;
use crate::product::{estimator_variances, goodman_product_variance, subset_sums_enumerated};
use crate::stats::{
    batch_mce, mean_var, Approach, BatchScheme, EstimateReport, Method, MomentSummary,
    RandomStreamSet, StreamRng,
};

/// A two-level model `v ~ h(v)`, `uᵢ | v ~ h(uᵢ | v)`.
///
/// `phi` must be deterministic in `(i, u, v)`, and inner draws for distinct
/// factors must be independent given `v`.
pub trait HierarchicalModel: Sync {
    type Outer: Send + Sync;
    type Inner;

    fn factors(&self) -> usize;
    fn sample_outer(&self, rng: &mut StreamRng) -> Result<Self::Outer>;
    fn sample_inner(&self, i: usize, v: &Self::Outer, rng: &mut StreamRng) -> Result<Self::Inner>;
    fn phi(&self, i: usize, u: &Self::Inner, v: &Self::Outer) -> f64;

    /// Exact `(E(φᵢ | v), Var(φᵢ | v))`, when known.
    fn conditional_moments(&self, _i: usize, _v: &Self::Outer) -> Option<(f64, f64)> {
        None
    }
}

/// One draw of `Πᵢ φᵢ(uᵢ, v)` with `(u, v)` drawn jointly.
fn joint_row<M: HierarchicalModel>(model: &M, rng: &mut StreamRng) -> Result<LogSigned> {
    let v = model.sample_outer(rng)?;
    let mut prod = LogSigned::ONE;
    for i in 0..model.factors() {
        let u = model.sample_inner(i, &v, rng)?;
        prod = prod * LogSigned::from_f64(model.phi(i, &u, &v));
    }
    Ok(prod)
}

/// One outer draw of `Πᵢ φ̄ᵢ`, each factor averaged over `r2` inner draws,
/// or replaced by its exact conditional mean when `r2 == 0`.
fn marginal_row<M: HierarchicalModel>(model: &M, r2: usize, rng: &mut StreamRng) -> Result<LogSigned> {
    let v = model.sample_outer(rng)?;
    let mut prod = LogSigned::ONE;
    for i in 0..model.factors() {
        let mean = if r2 == 0 {
            model
                .conditional_moments(i, &v)
                .ok_or_else(|| Error::input("R2 = 0 requires analytic conditional moments"))?
                .0
        } else {
            let mut s = 0.0;
            for _ in 0..r2 {
                let u = model.sample_inner(i, &v, rng)?;
                s += model.phi(i, &u, &v);
            }
            s / r2 as f64
        };
        prod = prod * LogSigned::from_f64(mean);
    }
    Ok(prod)
}

/// Joint estimate from a single stream, sequentially. Used for replicate
/// experiments where parallelism is across replicates.
pub fn nested_joint_value<M: HierarchicalModel>(model: &M, r: usize, rng: &mut StreamRng) -> Result<LogSigned> {
    if r == 0 {
        return Err(Error::input("R must be at least 1"));
    }
    let rows = (0..r).map(|_| joint_row(model, rng)).collect::<Result<Vec<_>>>()?;
    Ok(LogSigned::mean(&rows))
}

/// Nested marginal estimate from a single stream; `r2 == 0` selects the
/// exact-conditional-mean path.
pub fn nested_marginal_value<M: HierarchicalModel>(
    model: &M,
    r1: usize,
    r2: usize,
    rng: &mut StreamRng,
) -> Result<LogSigned> {
    if r1 == 0 {
        return Err(Error::input("R1 must be at least 1"));
    }
    let rows = (0..r1)
        .map(|_| marginal_row(model, r2, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(LogSigned::mean(&rows))
}

fn report_from_rows(rows: &[LogSigned], approach: Approach, batches: usize) -> Result<EstimateReport> {
    let mut report = EstimateReport::from_signed(LogSigned::mean(rows), Method::Plain(approach), rows.len());
    report.batches = batches;
    if batches >= 2 {
        let scheme = BatchScheme::even(rows.len(), batches)?;
        let logs: Option<Vec<f64>> = scheme
            .ranges(rows.len())?
            .into_iter()
            .map(|r| {
                let m = LogSigned::mean(&rows[r]);
                (m.sign > 0).then_some(m.log_abs)
            })
            .collect();
        report.mce = logs.map(|l| batch_mce(&l)).transpose()?;
    }
    Ok(report)
}

/// Joint estimator with one stream per outer index and a batch-means MCE
/// over `batches` contiguous batches.
pub fn nested_joint<M: HierarchicalModel>(
    model: &M,
    r: usize,
    streams: &RandomStreamSet,
    batches: usize,
    exec: Execution,
) -> Result<EstimateReport> {
    if r == 0 {
        return Err(Error::input("R must be at least 1"));
    }
    let streams = streams.child(0, r as u64)?;
    let rows = exec.try_map(r, |k| joint_row(model, &mut streams.stream(k as u64)?))?;
    report_from_rows(&rows, Approach::Joint, batches)
}

/// Nested marginal estimator, parallel over outer draws.
pub fn nested_marginal<M: HierarchicalModel>(
    model: &M,
    r1: usize,
    r2: usize,
    streams: &RandomStreamSet,
    batches: usize,
    exec: Execution,
) -> Result<EstimateReport> {
    if r1 == 0 {
        return Err(Error::input("R1 must be at least 1"));
    }
    let streams = streams.child(1, r1 as u64)?;
    let rows = exec.try_map(r1, |k| marginal_row(model, r2, &mut streams.stream(k as u64)?))?;
    report_from_rows(&rows, Approach::Marginal, batches)
}

/// How the inner variance sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerSumMethod {
    /// `Πᵢ(Vᵢ/d + Eᵢ²) − Πᵢ Eᵢ²`, valid for any `N`.
    #[default]
    ProductForm,
    /// Explicit subset enumeration, `N ≤ 12`.
    SubsetEnumeration,
}

/// Sample sizes for the two nested estimators; `r2 == 0` means exact inner means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestedDesign {
    pub r_joint: usize,
    pub r1: usize,
    pub r2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondVariances {
    /// Plug-in `Var_v[Πᵢ E(φᵢ|v)]` (divisor = number of outer draws).
    pub common_term: f64,
    /// `E_v[Var(Πᵢ φᵢ | v)]`.
    pub inner_joint: f64,
    /// `E_v[Var(Πᵢ φ̄ᵢ | v)]` with `R₂` inner draws; zero on the exact path.
    pub inner_marginal: f64,
    pub var_joint: f64,
    pub var_marginal: f64,
    /// Standard error of the plug-in `var_joint` from the outer draws.
    pub var_joint_se: f64,
    pub outer_draws: usize,
}

/// Conditional moments at `v`: exact when available, otherwise estimated from
/// `inner_draws` draws (divisor `inner_draws`).
fn moments_at<M: HierarchicalModel>(
    model: &M,
    v: &M::Outer,
    inner_draws: usize,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = model.factors();
    let mut mean = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    for i in 0..n {
        if let Some((e, s2)) = model.conditional_moments(i, v) {
            mean.push(e);
            var.push(s2);
        } else {
            if inner_draws < 2 {
                return Err(Error::input(
                    "no analytic conditional moments; need at least 2 inner draws to estimate them",
                ));
            }
            let xs = (0..inner_draws)
                .map(|_| model.sample_inner(i, v, rng).map(|u| model.phi(i, &u, v)))
                .collect::<Result<Vec<f64>>>()?;
            let (e, s2) = mean_var(&xs);
            mean.push(e);
            var.push(s2);
        }
    }
    Ok((mean, var))
}

/// Plug-in evaluation of both nested-estimator variances by outer Monte Carlo
/// over `outer_draws` values of `v`, with the inner sums evaluated exactly.
pub fn cond_variance_formulas<M: HierarchicalModel>(
    model: &M,
    design: NestedDesign,
    outer_draws: usize,
    inner_draws: usize,
    method: InnerSumMethod,
    rng: &mut StreamRng,
) -> Result<CondVariances> {
    let n = model.factors();
    if design.r_joint == 0 || design.r1 == 0 {
        return Err(Error::input("R and R1 must be at least 1"));
    }
    if outer_draws < 2 {
        return Err(Error::input("need at least 2 outer draws"));
    }
    if method == InnerSumMethod::SubsetEnumeration && n > crate::product::SUBSET_ENUMERATION_MAX {
        return Err(Error::input(format!(
            "subset enumeration is capped at N = {}, got {n}; use the product form",
            crate::product::SUBSET_ENUMERATION_MAX
        )));
    }
    let mut prods = Vec::with_capacity(outer_draws);
    let mut inner_j = Vec::with_capacity(outer_draws);
    let mut inner_m = Vec::with_capacity(outer_draws);
    for _ in 0..outer_draws {
        let v = model.sample_outer(rng)?;
        let (mean, var) = moments_at(model, &v, inner_draws, rng)?;
        prods.push(mean.iter().product::<f64>());
        let m = MomentSummary::from_moments(mean, var, 0.0)?;
        let (j, mg) = match method {
            InnerSumMethod::ProductForm => {
                let j = goodman_product_variance(&m);
                let mg = if design.r2 == 0 {
                    0.0
                } else {
                    estimator_variances(&m, design.r2)?.var_marginal
                };
                (j, mg)
            }
            InnerSumMethod::SubsetEnumeration => {
                let s = subset_sums_enumerated(&m)?;
                let j: f64 = s.iter().sum();
                let mg = if design.r2 == 0 {
                    0.0
                } else {
                    let d = design.r2 as f64;
                    s.iter()
                        .enumerate()
                        .map(|(k, sk)| sk / d.powi(k as i32 + 1))
                        .sum()
                };
                (j, mg)
            }
        };
        inner_j.push(j);
        inner_m.push(mg);
    }
    let (mean_p, common_term) = mean_var(&prods);
    let (inner_joint, _) = mean_var(&inner_j);
    let (inner_marginal, _) = mean_var(&inner_m);
    // Per-draw contribution to var_joint·R; its spread gives the plug-in SE.
    let contrib: Vec<f64> = prods
        .iter()
        .zip(&inner_j)
        .map(|(p, j)| (p - mean_p) * (p - mean_p) + j)
        .collect();
    let (_, contrib_var) = mean_var(&contrib);
    let var_joint_se = (contrib_var / outer_draws as f64).sqrt() / design.r_joint as f64;
    Ok(CondVariances {
        common_term,
        inner_joint,
        inner_marginal,
        var_joint: (common_term + inner_joint) / design.r_joint as f64,
        var_marginal: (common_term + inner_marginal) / design.r1 as f64,
        var_joint_se,
        outer_draws,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub factor: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Outer draws where the conditional mean was zero; excluded above.
    pub flagged: usize,
}

/// Min/median/max over the given `v` values of `CV(φᵢ | v)` per factor.
pub fn cond_cv_diagnostics<M: HierarchicalModel>(
    model: &M,
    v_draws: &[M::Outer],
    inner_draws: usize,
    rng: &mut StreamRng,
) -> Result<Vec<CvSummary>> {
    let n = model.factors();
    let mut cvs: Vec<Vec<f64>> = vec![Vec::with_capacity(v_draws.len()); n];
    let mut flagged = vec![0usize; n];
    for v in v_draws {
        let (mean, var) = moments_at(model, v, inner_draws, rng)?;
        for i in 0..n {
            if mean[i] == 0.0 {
                flagged[i] += 1;
            } else {
                cvs[i].push(var[i].sqrt() / mean[i].abs());
            }
        }
    }
    Ok(cvs
        .into_iter()
        .zip(flagged)
        .enumerate()
        .map(|(factor, (mut c, flagged))| {
            c.sort_by(f64::total_cmp);
            let (min, median, max) = summarize_sorted(&c);
            CvSummary {
                factor,
                min,
                median,
                max,
                flagged,
            }
        })
        .collect())
}

/// `(min, median, max)` of a sorted slice; NaN when empty.
pub fn summarize_sorted(sorted: &[f64]) -> (f64, f64, f64) {
    if sorted.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    (sorted[0], median, sorted[n - 1])
}

/// Reference model: `v ~ N(0, 1)`, `uᵢ | v ~ N(v, s²)`, `φᵢ = uᵢ`.
///
/// For `N = 2`, `s = 1`: `E[φ₁φ₂] = 1`, `Var_v[v²] = 2`, and
/// `E_v[Var(φ₁φ₂ | v)] = 3`, so `Var(Î_J) = 5/R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianHierarchy {
    pub factors: usize,
    pub inner_sd: f64,
}

impl GaussianHierarchy {
    pub fn new(factors: usize, inner_sd: f64) -> Result<Self> {
        if factors == 0 || !(inner_sd > 0.0) {
            return Err(Error::input("need at least one factor and a positive inner sd"));
        }
        Ok(GaussianHierarchy { factors, inner_sd })
    }

    /// `Var_v[v^N] = (2N−1)!! − (E v^N)²`.
    pub fn common_term(&self) -> f64 {
        let n = self.factors as u32;
        let odd_df = |m: u32| (1..=m).map(|i| (2 * i - 1) as f64).product::<f64>();
        let e_vn = if n % 2 == 0 { odd_df(n / 2) } else { 0.0 };
        odd_df(n) - e_vn * e_vn
    }
}

impl HierarchicalModel for GaussianHierarchy {
    type Outer = f64;
    type Inner = f64;

    fn factors(&self) -> usize {
        self.factors
    }

    fn sample_outer(&self, rng: &mut StreamRng) -> Result<f64> {
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        Ok(z)
    }

    fn sample_inner(&self, _i: usize, v: &f64, rng: &mut StreamRng) -> Result<f64> {
        Normal::new(*v, self.inner_sd)
            .map(|d| d.sample(rng))
            .map_err(|e| Error::input(e.to_string()))
    }

    fn phi(&self, _i: usize, u: &f64, _v: &f64) -> f64 {
        *u
    }

    fn conditional_moments(&self, _i: usize, v: &f64) -> Option<(f64, f64)> {
        Some((*v, self.inner_sd * self.inner_sd))
    }
}
