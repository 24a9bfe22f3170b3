//! Joint and marginal estimators of `E[Πᵢ φᵢ(Yᵢ)]` and their exact variances.
//!
//! With `Eᵢ`, `Vᵢ` the mean and variance of factor `i` and
//! `S_k = Σ_{|C|=k} Π_{i∈C} Vᵢ Π_{j∉C} Eⱼ²`:
//!
//! ```text
//! Var(Î_J) = (1/R) Σ_k S_k          Var(Î_M) = Σ_k S_k / R^k
//! ```
//!
//! `S_k` is obtained from the coefficients of `Πᵢ (Eᵢ² + Vᵢ t)`, which is
//! exact, `O(N²)` and free of cancellation because every term is nonnegative.

use crate::error::{Error, Result};
use crate::logspace::LogSigned;
use crate::stats::{batch_mce, Approach, BatchScheme, EstimateReport, Method, MomentSummary, SampleBlock};

/// `(1/R) Σᵣ Πᵢ φᵢ(yᵢ⁽ʳ⁾)` in sign-tracked log form.
pub fn joint_estimate(block: &SampleBlock) -> LogSigned {
    LogSigned::mean(&block.log_row_products())
}

/// `Πᵢ (1/R) Σᵣ φᵢ(yᵢ⁽ʳ⁾)` in sign-tracked log form.
pub fn marginal_estimate(block: &SampleBlock) -> LogSigned {
    (0..block.cols())
        .map(|i| column_mean(block, i))
        .fold(LogSigned::ONE, |acc, m| acc * m)
}

fn column_mean(block: &SampleBlock, i: usize) -> LogSigned {
    let terms: Vec<LogSigned> = block.column(i).map(LogSigned::from_f64).collect();
    LogSigned::mean(&terms)
}

pub fn estimate(block: &SampleBlock, approach: Approach) -> LogSigned {
    match approach {
        Approach::Joint => joint_estimate(block),
        Approach::Marginal => marginal_estimate(block),
    }
}

/// Pooled estimate over all rows plus the batch-means MCE over `scheme`.
///
/// The MCE is left undefined when there is a single batch or when some batch
/// estimate is not strictly positive (its log is then meaningless).
pub fn estimate_report(
    block: &SampleBlock,
    approach: Approach,
    scheme: &BatchScheme,
) -> Result<EstimateReport> {
    let ranges = scheme.ranges(block.rows())?;
    let pooled = estimate(block, approach);
    let batch_logs: Vec<Option<f64>> = ranges
        .into_iter()
        .map(|r| {
            let e = estimate(&block.slice_rows(r)?, approach);
            Ok((e.sign > 0).then_some(e.log_abs))
        })
        .collect::<Result<_>>()?;
    let mce = match batch_logs.iter().copied().collect::<Option<Vec<f64>>>() {
        Some(logs) if logs.len() >= 2 => Some(batch_mce(&logs)?),
        _ => None,
    };
    let mut report = EstimateReport::from_signed(pooled, Method::Plain(approach), block.rows());
    report.mce = mce;
    report.batches = scheme.batches;
    Ok(report)
}

/// Coefficients `S_0, …, S_N` of `Πᵢ (Eᵢ² + Vᵢ t)`; `S_0 = Πᵢ Eᵢ²`.
pub fn subset_sums(m: &MomentSummary) -> Vec<f64> {
    let mut c = vec![1.0];
    for (e, v) in m.mean.iter().zip(&m.var) {
        let e2 = e * e;
        let mut next = vec![0.0; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k] += ck * e2;
            next[k + 1] += ck * v;
        }
        c = next;
    }
    c
}

/// Largest `N` for which explicit subset enumeration is allowed.
pub const SUBSET_ENUMERATION_MAX: usize = 12;

/// `S_1, …, S_N` by enumerating every subset explicitly. Cross-check oracle
/// for [`subset_sums`]; refuses `N > 12`.
pub fn subset_sums_enumerated(m: &MomentSummary) -> Result<Vec<f64>> {
    let n = m.len();
    if n > SUBSET_ENUMERATION_MAX {
        return Err(Error::input(format!(
            "subset enumeration is capped at N = {SUBSET_ENUMERATION_MAX}, got {n}"
        )));
    }
    let mut sums = vec![0.0; n + 1];
    for mask in 1u32..(1 << n) {
        let mut term = 1.0;
        for i in 0..n {
            term *= if mask & (1 << i) != 0 {
                m.var[i]
            } else {
                m.mean[i] * m.mean[i]
            };
        }
        sums[mask.count_ones() as usize] += term;
    }
    Ok(sums[1..].to_vec())
}

/// Variance of a product of independent factors:
/// `Πᵢ (Vᵢ + Eᵢ²) − Πᵢ Eᵢ²`.
pub fn goodman_product_variance(m: &MomentSummary) -> f64 {
    if m.mean.iter().all(|&e| e != 0.0) {
        // ΠE² · (Π(1 + Vᵢ/Eᵢ²) − 1) without cancellation.
        let log_e2: f64 = m.mean.iter().map(|e| (e * e).ln()).sum();
        let s: f64 = m
            .mean
            .iter()
            .zip(&m.var)
            .map(|(e, v)| (v / (e * e)).ln_1p())
            .sum();
        log_e2.exp() * s.exp_m1()
    } else {
        m.mean
            .iter()
            .zip(&m.var)
            .map(|(e, v)| v + e * e)
            .product()
    }
}

/// Both estimator variances together with the per-order subset sums.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceBreakdown {
    pub var_joint: f64,
    pub var_marginal: f64,
    pub difference: f64,
    /// `S_1 / R`, shared by both estimators.
    pub first_order_term: f64,
    /// `S_k` for `k = 2..=N` (undamped; the joint estimator divides by `R`,
    /// the marginal one by `R^k`).
    pub higher_order_terms: Vec<f64>,
}

impl VarianceBreakdown {
    pub fn joint_term(&self, k: usize, r: usize) -> f64 {
        self.higher_order_terms[k - 2] / r as f64
    }

    pub fn marginal_term(&self, k: usize, r: usize) -> f64 {
        self.higher_order_terms[k - 2] / (r as f64).powi(k as i32)
    }
}

pub fn estimator_variances(m: &MomentSummary, r: usize) -> Result<VarianceBreakdown> {
    if r == 0 {
        return Err(Error::input("R must be at least 1"));
    }
    let rf = r as f64;
    let s = subset_sums(m);
    let mut var_joint = 0.0;
    let mut var_marginal = 0.0;
    let mut damp = 1.0;
    for sk in &s[1..] {
        damp /= rf;
        var_joint += sk;
        var_marginal += sk * damp;
    }
    var_joint /= rf;
    Ok(VarianceBreakdown {
        var_joint,
        var_marginal,
        difference: var_joint - var_marginal,
        first_order_term: s[1] / rf,
        higher_order_terms: s[2..].to_vec(),
    })
}

/// Estimator variances written through coefficients of variation, split on
/// the set of zero-mean factors.
pub fn variance_cv_form(m: &MomentSummary, r: usize, which: Approach) -> Result<f64> {
    if r == 0 {
        return Err(Error::input("R must be at least 1"));
    }
    let rf = r as f64;
    let n0 = m.zero_mean.len();
    let prod_zero_var: f64 = m.zero_mean.iter().map(|&i| m.var[i]).product();
    let nonzero: Vec<usize> = (0..m.len()).filter(|&i| !m.is_zero_mean(i)).collect();
    let prod_e2: f64 = nonzero.iter().map(|&i| m.mean[i] * m.mean[i]).product();
    let damp = match which {
        Approach::Joint => 1.0,
        Approach::Marginal => rf,
    };
    let cv2 = |i: usize| {
        let e = m.mean[i];
        m.var[i] / (e * e)
    };
    let bracket = if n0 == 0 {
        // Π(CV²/d + 1) − 1
        nonzero
            .iter()
            .map(|&i| (cv2(i) / damp).ln_1p())
            .sum::<f64>()
            .exp_m1()
    } else {
        nonzero.iter().map(|&i| cv2(i) / damp + 1.0).product()
    };
    let lead = match which {
        Approach::Joint => 1.0 / rf,
        Approach::Marginal => rf.powi(-(n0 as i32)),
    };
    Ok(lead * prod_zero_var * prod_e2 * bracket)
}

/// `Var(Î_J) − Var(Î_M) = (1/R) Σ_{k≥2} (1 − R^{1−k}) S_k`.
pub fn variance_difference(m: &MomentSummary, r: usize) -> Result<f64> {
    if r == 0 {
        return Err(Error::input("R must be at least 1"));
    }
    let ln_r = (r as f64).ln();
    let s = subset_sums(m);
    let total: f64 = s
        .iter()
        .enumerate()
        .skip(2)
        .map(|(k, sk)| -((1.0 - k as f64) * ln_r).exp_m1() * sk)
        .sum();
    Ok(total / r as f64)
}

/// Number of joint-estimator iterations that matches the variance of the
/// marginal estimator run with `r_marginal` iterations. Real-valued; round up
/// before use.
pub fn required_iterations(r_marginal: usize, m: &MomentSummary) -> Result<f64> {
    if r_marginal < 2 {
        return Err(Error::input("R_M must be at least 2"));
    }
    let vb = estimator_variances(m, r_marginal)?;
    if vb.var_marginal == 0.0 {
        return Err(Error::Degenerate("both variances zero".into()));
    }
    let rm = r_marginal as f64;
    let n = m.len();
    let n0 = m.zero_mean.len();
    let cv2: Vec<f64> = (0..n)
        .filter(|&i| !m.is_zero_mean(i))
        .map(|i| m.var[i] / (m.mean[i] * m.mean[i]))
        .collect();
    let omega = if n0 == n {
        rm.powi((n - n0) as i32)
    } else if n0 == 0 {
        let num: f64 = cv2.iter().map(|c| c.ln_1p()).sum::<f64>().exp_m1();
        let den: f64 = cv2.iter().map(|c| (c / rm).ln_1p()).sum::<f64>().exp_m1();
        num / den
    } else {
        cv2.iter().map(|c| (c + 1.0) / (c / rm + 1.0)).product()
    };
    Ok(rm.powi(n0 as i32) * omega)
}
