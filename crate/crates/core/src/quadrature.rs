//! Gauss–Hermite rules normalized for expectations under the standard normal.
//!
//! Nodes come from the Golub–Welsch eigenvalue problem for the Jacobi matrix
//! of the probabilists' Hermite polynomials, then each node is polished by
//! Newton steps on the orthonormal three-term recurrence. Weights are the
//! Christoffel numbers `1 / Σ_{k<n} p_k(x)²`, which keeps tiny tail weights
//! accurate to full relative precision.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;

pub const MAX_ORDER: usize = 100;
pub const MAX_TENSOR_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Row-major `points × dimension`.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
    dimension: usize,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dimension..(j + 1) * self.dimension]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks(self.dimension)
    }
}

/// Evaluates the orthonormal Hermite polynomials `p_{n−1}(x)`, `p_n(x)` and
/// `Σ_{k<n} p_k(x)²`.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sumsq = 0.0;
    for k in 0..n {
        sumsq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (prev, cur, sumsq)
}

/// `order`-point rule with `Σⱼ wⱼ f(xⱼ) ≈ E[f(Z)]`, `Z ~ N(0, 1)`, exact for
/// polynomials of degree `≤ 2·order − 1`.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::input(format!(
            "quadrature order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let n = order;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let sqrt_n = (n as f64).sqrt();
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (pm1, pn, _) = orthonormal_hermite(n, *x);
            let step = pn / (sqrt_n * pm1);
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, sumsq) = orthonormal_hermite(n, *x);
        weights.push(1.0 / sumsq);
    }

    // Exact symmetry about zero.
    for j in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - j] - nodes[j]);
        let w = 0.5 * (weights[j] + weights[n - 1 - j]);
        nodes[j] = -x;
        nodes[n - 1 - j] = x;
        weights[j] = w;
        weights[n - 1 - j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    Ok(QuadratureRule {
        nodes,
        weights,
        order,
        dimension: 1,
    })
}

/// Full tensor product of a one-dimensional rule with itself `k` times.
pub fn tensor_rule(base: &QuadratureRule, k: usize) -> Result<QuadratureRule> {
    if base.dimension != 1 {
        return Err(Error::input("tensor_rule expects a one-dimensional base rule"));
    }
    if k == 0 {
        return Err(Error::input("tensor dimension must be at least 1"));
    }
    let m = base.len();
    let points = (0..k).try_fold(1usize, |acc, _| acc.checked_mul(m));
    let points = match points {
        Some(p) if p <= MAX_TENSOR_POINTS => p,
        _ => {
            return Err(Error::input(format!(
                "tensor rule with {m}^{k} points exceeds the {MAX_TENSOR_POINTS}-point limit"
            )))
        }
    };
    let mut nodes = Vec::with_capacity(points * k);
    let mut weights = Vec::with_capacity(points);
    let mut idx = vec![0usize; k];
    for _ in 0..points {
        let mut w = 1.0;
        for &i in &idx {
            nodes.push(base.nodes[i]);
            w *= base.weights[i];
        }
        weights.push(w);
        // Odometer, last coordinate fastest.
        for d in (0..k).rev() {
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        order: base.order,
        dimension: k,
    })
}

/// Standard-normal rule of the given order in `k` dimensions.
pub fn standard_normal_rule(order: usize, k: usize) -> Result<QuadratureRule> {
    let base = gauss_hermite(order)?;
    if k == 1 {
        Ok(base)
    } else {
        tensor_rule(&base, k)
    }
}

/// `Σⱼ wⱼ f(nodeⱼ)`.
pub fn expect<F: Fn(&[f64]) -> f64>(rule: &QuadratureRule, f: F) -> Result<f64> {
    let mut total = 0.0;
    for (j, (x, w)) in rule.nodes().zip(&rule.weights).enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::non_finite(format!("quadrature node {j} at {x:?}"), v));
        }
        total += w * v;
    }
    Ok(total)
}

/// `log Σⱼ wⱼ exp(log_f(nodeⱼ))` for a positive integrand given on the log scale.
pub fn expect_log<F: Fn(&[f64]) -> f64>(rule: &QuadratureRule, log_f: F) -> Result<f64> {
    let mut terms = Vec::with_capacity(rule.len());
    for (j, (x, w)) in rule.nodes().zip(&rule.weights).enumerate() {
        let v = log_f(x);
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::non_finite(format!("quadrature node {j} at {x:?}"), v));
        }
        terms.push(w.ln() + v);
    }
    Ok(log_sum_exp(&terms))
}
