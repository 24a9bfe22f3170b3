//! Total covariation `TCI(Y) = E[Πᵢ Yᵢ] − Πᵢ E[Yᵢ]` of a sample, its
//! recursive decomposition into covariances of partial products, its
//! Cauchy–Schwarz bound and the variance-underestimation identity.
//!
//! All moments here are divisor-`R` sample moments; the identities are exact
//! for those and only for those.

use crate::error::{Error, Result};
use crate::product::{joint_estimate, marginal_estimate};
use crate::stats::{covariance, mean_var, moments, MomentSummary, SampleBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct TciReport {
    pub tci_direct: f64,
    pub tci_decomposed: f64,
    /// `Cov₍ₖ₎` for `k = 2..=N`.
    pub cov_terms: Vec<f64>,
    pub bound: f64,
    pub indep_variance: f64,
    pub true_variance: f64,
}

/// `Î_J − Î_M` on the sample.
pub fn tci_sample(block: &SampleBlock) -> f64 {
    joint_estimate(block).sub(marginal_estimate(block)).to_f64()
}

/// Sample covariance between the row product of columns `1..k−1` and
/// column `k` (1-based, `2 ≤ k ≤ N`).
pub fn cov_partial(block: &SampleBlock, k: usize) -> Result<f64> {
    let n = block.cols();
    if k < 2 || k > n {
        return Err(Error::input(format!("k must be in 2..={n}, got {k}")));
    }
    let lead = block.partial_row_products(k - 1);
    let yk: Vec<f64> = block.column(k - 1).collect();
    Ok(covariance(&lead, &yk))
}

/// Weighted sum of partial-product covariances; returns the total and the
/// individual `Cov₍ₖ₎` terms for `k = 2..=N`.
pub fn tci_decomposition(block: &SampleBlock) -> Result<(f64, Vec<f64>)> {
    let n = block.cols();
    if n < 2 {
        return Err(Error::input("decomposition needs at least 2 columns"));
    }
    let m = moments(block, 0.0)?;
    let cov_terms = (2..=n)
        .map(|k| cov_partial(block, k))
        .collect::<Result<Vec<f64>>>()?;
    Ok((weighted_cov_sum(&m.mean, &cov_terms), cov_terms))
}

/// `Cov₍N₎ + Σ_{k=1}^{N−2} (Π_{i=N−k+1}^{N} Eᵢ) Cov₍N−k₎`.
fn weighted_cov_sum(means: &[f64], cov_terms: &[f64]) -> f64 {
    let n = means.len();
    let cov = |k: usize| cov_terms[k - 2];
    let mut total = cov(n);
    let mut weight = 1.0;
    for k in 1..=n - 2 {
        weight *= means[n - k];
        total += weight * cov(n - k);
    }
    total
}

/// Upper bound on `|TCI|` from Cauchy–Schwarz applied to each term of the
/// decomposition. `partial_product_variances[j − 1]` is the variance of
/// `Π_{i=1}^{j} Yᵢ` for `j = 1..N−1`.
pub fn tci_bound(m: &MomentSummary, partial_product_variances: &[f64]) -> Result<f64> {
    let n = m.len();
    if n < 2 {
        return Err(Error::input("bound needs at least 2 factors"));
    }
    if partial_product_variances.len() != n - 1 {
        return Err(Error::input(format!(
            "expected {} partial product variances, got {}",
            n - 1,
            partial_product_variances.len()
        )));
    }
    if let Some(v) = partial_product_variances.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::input(format!("negative partial product variance {v}")));
    }
    let mut bound = 0.0;
    let mut weight = 1.0;
    for k in 0..=n - 2 {
        if k > 0 {
            weight *= m.mean[n - k].abs();
        }
        // Var(Π_{j=1}^{N−k−1} Y_j) · Var(Y_{N−k}), 1-based.
        let lead = partial_product_variances[n - k - 2];
        bound += weight * (lead * m.var[n - k - 1]).sqrt();
    }
    Ok(bound)
}

/// [`tci_bound`] with all inputs computed from the block.
pub fn tci_bound_for_block(block: &SampleBlock) -> Result<f64> {
    let m = moments(block, 0.0)?;
    let ppv: Vec<f64> = (1..block.cols())
        .map(|j| mean_var(&block.partial_row_products(j)).1)
        .collect();
    tci_bound(&m, &ppv)
}

/// Returns `(true_variance, indep_variance, tci)` where, with `Pᵣ` the row
/// products, `true = (1/R)Σ(Pᵣ − Î_J)²` and `indep = (1/R)Σ(Pᵣ − Î_M)²`.
/// They satisfy `true = indep − tci²`.
pub fn variance_underestimation(block: &SampleBlock) -> (f64, f64, f64) {
    let p = block.partial_row_products(block.cols());
    let r = p.len() as f64;
    let ij = p.iter().sum::<f64>() / r;
    let im = marginal_estimate(block).to_f64();
    let true_var = p.iter().map(|x| (x - ij) * (x - ij)).sum::<f64>() / r;
    let indep_var = p.iter().map(|x| (x - im) * (x - im)).sum::<f64>() / r;
    (true_var, indep_var, ij - im)
}

/// Everything above for one block.
pub fn tci_report(block: &SampleBlock) -> Result<TciReport> {
    let (tci_decomposed, cov_terms) = tci_decomposition(block)?;
    let (true_variance, indep_variance, _) = variance_underestimation(block);
    Ok(TciReport {
        tci_direct: tci_sample(block),
        tci_decomposed,
        cov_terms,
        bound: tci_bound_for_block(block)?,
        indep_variance,
        true_variance,
    })
}

/// Covariation of one block of averaged variables, on both the linear and
/// the log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariation {
    /// Linear-scale TCI; may under- or overflow for wide blocks.
    pub tci: f64,
    pub log_joint: f64,
    pub log_marginal: f64,
    /// `log Î_J − log Î_M`, the shift the covariation induces on a log estimate.
    pub log_effect: f64,
}

impl BlockCovariation {
    pub fn of(block: &SampleBlock) -> Self {
        let j = joint_estimate(block);
        let m = marginal_estimate(block);
        BlockCovariation {
            tci: j.sub(m).to_f64(),
            log_joint: j.log_abs,
            log_marginal: m.log_abs,
            log_effect: j.log_abs - m.log_abs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TciDiagnostics {
    pub numerator: BlockCovariation,
    pub denominator: Option<BlockCovariation>,
    /// Net log-scale covariation effect on the estimator: numerator effect
    /// minus denominator effect for ratio estimators.
    pub net_log_effect: f64,
    /// Numerator TCI minus denominator TCI on the linear scale.
    pub net_tci: f64,
}

pub fn estimator_tci_diagnostics(
    numerator: &SampleBlock,
    denominator: Option<&SampleBlock>,
) -> TciDiagnostics {
    let num = BlockCovariation::of(numerator);
    let den = denominator.map(BlockCovariation::of);
    let (net_log_effect, net_tci) = match &den {
        Some(d) => (num.log_effect - d.log_effect, num.tci - d.tci),
        None => (num.log_effect, num.tci),
    };
    TciDiagnostics {
        numerator: num,
        denominator: den,
        net_log_effect,
        net_tci,
    }
}
