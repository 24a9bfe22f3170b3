//! Binary logistic latent trait model: parameters, data, likelihoods, priors
//! and simulation.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::{log1p_exp, log_sum_exp};
use crate::quadrature::QuadratureRule;
use crate::stats::StreamRng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log N(x; mean, sd²)`.
#[inline]
pub fn normal_log_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (LN_2PI + z * z) - sd.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of items `p`.
    pub items: usize,
    /// Number of subjects.
    pub cases: usize,
    /// Latent dimension `k`.
    pub latent_dim: usize,
    /// Prior sd of `αⱼ` and of the free off-diagonal loadings.
    pub prior_sd_free: f64,
    /// Log-normal prior of the diagonal loadings: `log βⱼⱼ ~ N(mean, sd²)`.
    pub prior_logdiag_mean: f64,
    pub prior_logdiag_sd: f64,
}

impl ModelConfig {
    pub fn new(items: usize, cases: usize, latent_dim: usize) -> Result<Self> {
        let c = ModelConfig {
            items,
            cases,
            latent_dim,
            prior_sd_free: 2.0,
            prior_logdiag_mean: 0.0,
            prior_logdiag_sd: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.items == 0 {
            return Err(Error::config("p", "need at least one item"));
        }
        if self.cases == 0 {
            return Err(Error::config("cases", "need at least one case"));
        }
        if self.latent_dim == 0 || self.latent_dim > self.items {
            return Err(Error::config("k", format!(
                "latent dimension must be in 1..={}, got {}",
                self.items, self.latent_dim
            )));
        }
        if !(self.prior_sd_free > 0.0) || !(self.prior_logdiag_sd > 0.0) {
            return Err(Error::config("prior", "prior standard deviations must be positive"));
        }
        Ok(())
    }

    /// Number of free loadings: row `j` has `min(j + 1, k)` entries.
    pub fn free_loadings(&self) -> usize {
        (0..self.items).map(|j| (j + 1).min(self.latent_dim)).sum()
    }

    /// Length of the sampling-scale parameter vector `(α, βₑ)`.
    pub fn theta_dim(&self) -> usize {
        self.items + self.free_loadings()
    }

    pub fn latent_len(&self) -> usize {
        self.cases * self.latent_dim
    }
}

/// Intercepts and a lower-triangular loading matrix (row-major `p × k`).
#[derive(Debug, Clone, PartialEq)]
pub struct ItemParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub latent_dim: usize,
}

impl ItemParams {
    pub fn items(&self) -> usize {
        self.alpha.len()
    }

    pub fn loading(&self, j: usize, l: usize) -> f64 {
        self.beta[j * self.latent_dim + l]
    }

    /// Structural zeros above the diagonal, strictly positive diagonal.
    pub fn check_constraints(&self) -> Result<()> {
        let k = self.latent_dim;
        if self.beta.len() != self.items() * k {
            return Err(Error::input("loading matrix has the wrong size"));
        }
        for j in 0..self.items() {
            for l in 0..k {
                let b = self.loading(j, l);
                if l > j && b != 0.0 {
                    return Err(Error::input(format!("loading ({j},{l}) must be zero")));
                }
                if l == j && !(b > 0.0) {
                    return Err(Error::input(format!("diagonal loading ({j},{j}) must be positive")));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn linear_predictor(&self, j: usize, z: &[f64]) -> f64 {
        let row = &self.beta[j * self.latent_dim..(j + 1) * self.latent_dim];
        self.alpha[j] + row.iter().zip(z).map(|(b, z)| b * z).sum::<f64>()
    }

    /// Sampling-scale vector `(α, βₑ)` with `log βⱼⱼ` in place of `βⱼⱼ`.
    pub fn to_sampling(&self) -> Vec<f64> {
        let k = self.latent_dim;
        let mut v = self.alpha.clone();
        for j in 0..self.items() {
            for l in 0..(j + 1).min(k) {
                let b = self.loading(j, l);
                v.push(if l == j { b.ln() } else { b });
            }
        }
        v
    }

    pub fn from_sampling(cfg: &ModelConfig, theta: &[f64]) -> Result<Self> {
        if theta.len() != cfg.theta_dim() {
            return Err(Error::input(format!(
                "expected {} sampling-scale parameters, got {}",
                cfg.theta_dim(),
                theta.len()
            )));
        }
        let (p, k) = (cfg.items, cfg.latent_dim);
        let alpha = theta[..p].to_vec();
        let mut beta = vec![0.0; p * k];
        let mut idx = p;
        for j in 0..p {
            for l in 0..(j + 1).min(k) {
                beta[j * k + l] = if l == j { theta[idx].exp() } else { theta[idx] };
                idx += 1;
            }
        }
        Ok(ItemParams {
            alpha,
            beta,
            latent_dim: k,
        })
    }
}

/// Position of each sampling-scale coordinate: `(item, latent index)` for
/// loadings, `None` for intercepts.
pub fn sampling_layout(cfg: &ModelConfig) -> Vec<Option<(usize, usize)>> {
    let mut v = vec![None; cfg.items];
    for j in 0..cfg.items {
        for l in 0..(j + 1).min(cfg.latent_dim) {
            v.push(Some((j, l)));
        }
    }
    v
}

/// Binary responses, `cases × items`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    y: Vec<u8>,
    cases: usize,
    items: usize,
}

impl Dataset {
    pub fn new(y: Vec<u8>, cases: usize, items: usize) -> Result<Self> {
        if y.len() != cases * items || cases == 0 || items == 0 {
            return Err(Error::input("dataset shape mismatch"));
        }
        if let Some(pos) = y.iter().position(|&v| v > 1) {
            return Err(Error::input(format!(
                "response at case {}, item {} is {} (must be 0 or 1)",
                pos / items,
                pos % items,
                y[pos]
            )));
        }
        Ok(Dataset { y, cases, items })
    }

    pub fn cases(&self) -> usize {
        self.cases
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn case(&self, i: usize) -> &[u8] {
        &self.y[i * self.items..(i + 1) * self.items]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.y[i * self.items + j]
    }

    /// Headered CSV: `item1,…,itemp`, one row per case.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record((1..=self.items).map(|j| format!("item{j}")))?;
        for i in 0..self.cases {
            wr.write_record(self.case(i).iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let items = headers.len();
        for (j, h) in headers.iter().enumerate() {
            if h.trim() != format!("item{}", j + 1) {
                return Err(Error::input(format!(
                    "column {} header is `{h}`, expected `item{}`",
                    j + 1,
                    j + 1
                )));
            }
        }
        let mut y = Vec::new();
        let mut cases = 0;
        for rec in rd.records() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: u8 = match field.trim() {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::input(format!(
                            "case {}, item{}: `{other}` is not 0/1",
                            cases + 1,
                            j + 1
                        )))
                    }
                };
                y.push(v);
            }
            cases += 1;
        }
        Self::new(y, cases, items)
    }
}

/// `logistic(α_j + Σ_ℓ β_{jℓ} z_ℓ)`.
pub fn response_prob(theta: &ItemParams, z: &[f64], j: usize) -> f64 {
    let eta = theta.linear_predictor(j, z);
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log P(y | η)` for a Bernoulli with logit `η`.
#[inline]
pub fn bernoulli_logit_log_pmf(y: u8, eta: f64) -> f64 {
    if y == 1 {
        -log1p_exp(-eta)
    } else {
        -log1p_exp(eta)
    }
}

/// `log f(Yᵢ | θ, zᵢ)`.
pub fn case_loglik(theta: &ItemParams, z: &[f64], responses: &[u8]) -> f64 {
    responses
        .iter()
        .enumerate()
        .map(|(j, &y)| bernoulli_logit_log_pmf(y, theta.linear_predictor(j, z)))
        .sum()
}

fn check_shapes(theta: &ItemParams, data: &Dataset) -> Result<()> {
    if theta.items() != data.items() {
        return Err(Error::input(format!(
            "model has {} items, data has {}",
            theta.items(),
            data.items()
        )));
    }
    Ok(())
}

/// `Σᵢ Σⱼ [y log P + (1 − y) log(1 − P)]` given latent scores `z`
/// (row-major `cases × k`).
pub fn joint_loglik(theta: &ItemParams, z: &[f64], data: &Dataset) -> Result<f64> {
    check_shapes(theta, data)?;
    let k = theta.latent_dim;
    if z.len() != data.cases() * k {
        return Err(Error::input("latent score matrix has the wrong size"));
    }
    Ok((0..data.cases())
        .map(|i| case_loglik(theta, &z[i * k..(i + 1) * k], data.case(i)))
        .sum())
}

/// Per-node log response probabilities, shared by every case.
struct NodeTable {
    /// `[node][item] -> (log P(y=0), log P(y=1))`
    logp: Vec<(f64, f64)>,
    log_w: Vec<f64>,
    items: usize,
}

impl NodeTable {
    fn new(theta: &ItemParams, rule: &QuadratureRule) -> Self {
        let items = theta.items();
        let mut logp = Vec::with_capacity(rule.len() * items);
        for node in rule.nodes() {
            for j in 0..items {
                let eta = theta.linear_predictor(j, node);
                logp.push((bernoulli_logit_log_pmf(0, eta), bernoulli_logit_log_pmf(1, eta)));
            }
        }
        NodeTable {
            logp,
            log_w: rule.weights().iter().map(|w| w.ln()).collect(),
            items,
        }
    }

    fn case(&self, responses: &[u8], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        for (q, lw) in self.log_w.iter().enumerate() {
            let row = &self.logp[q * self.items..(q + 1) * self.items];
            let s: f64 = row
                .iter()
                .zip(responses)
                .map(|(lp, &y)| if y == 1 { lp.1 } else { lp.0 })
                .sum();
            scratch.push(lw + s);
        }
        log_sum_exp(scratch)
    }
}

/// Per-case `log ∫ Πⱼ P^y (1−P)^{1−y} φ(z) dz` by quadrature.
pub fn case_marginal_logliks(theta: &ItemParams, data: &Dataset, rule: &QuadratureRule) -> Result<Vec<f64>> {
    check_shapes(theta, data)?;
    if rule.dimension() != theta.latent_dim {
        return Err(Error::input(format!(
            "quadrature rule has dimension {}, model has {} latent variables",
            rule.dimension(),
            theta.latent_dim
        )));
    }
    let table = NodeTable::new(theta, rule);
    let mut scratch = Vec::with_capacity(rule.len());
    Ok((0..data.cases())
        .map(|i| table.case(data.case(i), &mut scratch))
        .collect())
}

/// `Σᵢ log ∫ f(Yᵢ | θ, z) φ(z) dz`.
pub fn marginal_loglik(theta: &ItemParams, data: &Dataset, rule: &QuadratureRule) -> Result<f64> {
    Ok(case_marginal_logliks(theta, data, rule)?.iter().sum())
}

/// Log prior on the natural scale: normal for `α` and off-diagonal loadings,
/// log-normal for the diagonal. `-inf` outside the support.
pub fn log_prior(cfg: &ModelConfig, theta: &ItemParams) -> f64 {
    let sd = cfg.prior_sd_free;
    let mut lp: f64 = theta.alpha.iter().map(|&a| normal_log_density(a, 0.0, sd)).sum();
    for j in 0..theta.items() {
        for l in 0..(j + 1).min(theta.latent_dim) {
            let b = theta.loading(j, l);
            if l == j {
                if !(b > 0.0) {
                    return f64::NEG_INFINITY;
                }
                lp += normal_log_density(b.ln(), cfg.prior_logdiag_mean, cfg.prior_logdiag_sd) - b.ln();
            } else {
                lp += normal_log_density(b, 0.0, sd);
            }
        }
    }
    lp
}

/// Log prior density of the sampling-scale vector `(α, βₑ)`: the diagonal
/// enters through `log βⱼⱼ`, which absorbs the Jacobian.
pub fn log_prior_sampling(cfg: &ModelConfig, theta: &[f64]) -> f64 {
    sampling_layout(cfg)
        .iter()
        .zip(theta)
        .map(|(slot, &x)| match slot {
            Some((j, l)) if j == l => normal_log_density(x, cfg.prior_logdiag_mean, cfg.prior_logdiag_sd),
            _ => normal_log_density(x, 0.0, cfg.prior_sd_free),
        })
        .sum()
}

/// Standard-normal log density summed over every latent score.
pub fn log_prior_z(z: &[f64]) -> f64 {
    z.iter().map(|&x| -0.5 * (LN_2PI + x * x)).sum()
}

/// Draws a parameter set: `α` and free loadings from `U(−2, 2)`, diagonal
/// loadings redrawn until positive.
pub fn simulate_params(cfg: &ModelConfig, rng: &mut StreamRng) -> ItemParams {
    let (p, k) = (cfg.items, cfg.latent_dim);
    let alpha = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let mut beta = vec![0.0; p * k];
    for j in 0..p {
        for l in 0..(j + 1).min(k) {
            let mut b: f64 = rng.random_range(-2.0..2.0);
            if l == j {
                while b <= 0.0 {
                    b = rng.random_range(-2.0..2.0);
                }
            }
            beta[j * k + l] = b;
        }
    }
    ItemParams {
        alpha,
        beta,
        latent_dim: k,
    }
}

/// Latent scores from `N(0, I)` and responses from the logistic model.
pub fn simulate_responses(theta: &ItemParams, cases: usize, rng: &mut StreamRng) -> Result<(Dataset, Vec<f64>)> {
    let k = theta.latent_dim;
    let p = theta.items();
    let z: Vec<f64> = (0..cases * k).map(|_| StandardNormal.sample(rng)).collect();
    let mut y = Vec::with_capacity(cases * p);
    for i in 0..cases {
        let zi = &z[i * k..(i + 1) * k];
        for j in 0..p {
            let u: f64 = rng.random();
            y.push(u8::from(u < response_prob(theta, zi, j)));
        }
    }
    Ok((Dataset::new(y, cases, p)?, z))
}

/// Simulated dataset together with the generating parameters and scores.
pub fn simulate_dataset(cfg: &ModelConfig, seed: u64) -> Result<(Dataset, ItemParams, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = crate::stats::stream_rng(seed, 0);
    let theta = simulate_params(cfg, &mut rng);
    let (data, z) = simulate_responses(&theta, cfg.cases, &mut rng)?;
    Ok((data, theta, z))
}
