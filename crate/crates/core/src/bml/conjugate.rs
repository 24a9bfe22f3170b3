//! Normal-normal hierarchy with closed-form evidence:
//! `yᵢ | zᵢ ~ N(zᵢ, σ²)`, `zᵢ | μ ~ N(μ, τ²)`, `μ ~ N(0, s²)`.
//!
//! The joint parameter vector is `(μ, z₁, …, z_n)`; the marginal one is `μ`
//! alone with `zᵢ` integrated out analytically.

use rand_distr::{Distribution, StandardNormal};

use super::{evaluate_draws, EvaluatedDraws, Importance};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::latent::importance::{column_moments, IndependentNormals, MvnBlock};
use crate::latent::model::normal_log_density;
use crate::latent::GaussianImportance;
use crate::stats::{make_streams, stream_rng, Approach, StreamRng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateNormal {
    pub y: Vec<f64>,
    pub sigma: f64,
    pub tau: f64,
    pub prior_sd: f64,
}

impl ConjugateNormal {
    pub fn new(y: Vec<f64>, sigma: f64, tau: f64, prior_sd: f64) -> Result<Self> {
        if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("need at least one finite observation"));
        }
        if !(sigma > 0.0 && tau > 0.0 && prior_sd > 0.0) {
            return Err(Error::input("scales must be positive"));
        }
        Ok(ConjugateNormal {
            y,
            sigma,
            tau,
            prior_sd,
        })
    }

    /// A small fixed instance used by tests and the verification suite.
    pub fn reference() -> Self {
        Self::new(vec![0.8, -0.3, 1.5, 0.2, 1.1], 1.0, 0.7, 1.5).expect("valid reference model")
    }

    fn a(&self) -> f64 {
        self.sigma * self.sigma + self.tau * self.tau
    }

    pub fn dim(&self, approach: Approach) -> usize {
        match approach {
            Approach::Joint => 1 + self.y.len(),
            Approach::Marginal => 1,
        }
    }

    /// `log N(y; 0, aI + s²11ᵀ)`.
    pub fn log_evidence(&self) -> f64 {
        let n = self.y.len() as f64;
        let a = self.a();
        let s2 = self.prior_sd * self.prior_sd;
        let sum: f64 = self.y.iter().sum();
        let sumsq: f64 = self.y.iter().map(|v| v * v).sum();
        let big = a + n * s2;
        let log_det = (n - 1.0) * a.ln() + big.ln();
        let quad = (sumsq - s2 * sum * sum / big) / a;
        -0.5 * (n * LN_2PI + log_det + quad)
    }

    /// Posterior mean and sd of `μ`.
    pub fn mu_posterior(&self) -> (f64, f64) {
        let a = self.a();
        let prec = 1.0 / (self.prior_sd * self.prior_sd) + self.y.len() as f64 / a;
        let sum: f64 = self.y.iter().sum();
        ((sum / a) / prec, prec.recip().sqrt())
    }

    /// Mean and sd of `zᵢ | μ, y`.
    pub fn z_conditional(&self, i: usize, mu: f64) -> (f64, f64) {
        let (s2, t2) = (self.sigma * self.sigma, self.tau * self.tau);
        let a = self.a();
        ((t2 * self.y[i] + s2 * mu) / a, (s2 * t2 / a).sqrt())
    }

    /// `log f(y | ϑ) + log π(ϑ)`.
    pub fn log_target(&self, approach: Approach, x: &[f64]) -> f64 {
        let mu = x[0];
        let prior = normal_log_density(mu, 0.0, self.prior_sd);
        match approach {
            Approach::Marginal => {
                let sd = self.a().sqrt();
                prior + self.y.iter().map(|&y| normal_log_density(y, mu, sd)).sum::<f64>()
            }
            Approach::Joint => {
                prior
                    + self
                        .y
                        .iter()
                        .zip(&x[1..])
                        .map(|(&y, &z)| normal_log_density(y, z, self.sigma) + normal_log_density(z, mu, self.tau))
                        .sum::<f64>()
            }
        }
    }

    /// Exact posterior log density.
    pub fn log_posterior(&self, approach: Approach, x: &[f64]) -> f64 {
        let (m, sd) = self.mu_posterior();
        let mut lp = normal_log_density(x[0], m, sd);
        if approach == Approach::Joint {
            for (i, &z) in x[1..].iter().enumerate() {
                let (cm, csd) = self.z_conditional(i, x[0]);
                lp += normal_log_density(z, cm, csd);
            }
        }
        lp
    }

    pub fn sample_posterior(&self, approach: Approach, rng: &mut StreamRng) -> Vec<f64> {
        let (m, sd) = self.mu_posterior();
        let e: f64 = StandardNormal.sample(rng);
        let mu = m + sd * e;
        let mut x = vec![mu];
        if approach == Approach::Joint {
            for i in 0..self.y.len() {
                let (cm, csd) = self.z_conditional(i, mu);
                let e: f64 = StandardNormal.sample(rng);
                x.push(cm + csd * e);
            }
        }
        x
    }

    /// Independent posterior draws, draw `r` on stream `r` of `seed`.
    pub fn posterior_draws(&self, approach: Approach, count: usize, seed: u64, exec: Execution) -> Vec<Vec<f64>> {
        exec.map(count, |r| self.sample_posterior(approach, &mut stream_rng(seed, r as u64)))
    }
}

/// The exact posterior used as an importance function.
pub struct ExactPosterior<'a> {
    pub model: &'a ConjugateNormal,
    pub approach: Approach,
}

impl Importance for ExactPosterior<'_> {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.model.log_posterior(self.approach, x)
    }

    fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.model.sample_posterior(self.approach, rng)
    }
}

/// Moment-matched importance function from a set of posterior draws: a
/// normal for `μ` and, jointly, independent normals for each `zᵢ`.
pub fn fit_moment_importance(draws: &[Vec<f64>], approach: Approach) -> Result<GaussianImportance> {
    let n = draws.len();
    if n < 2 {
        return Err(Error::input("need at least two pilot draws"));
    }
    let d = draws[0].len();
    let flat: Vec<f64> = draws.concat();
    let (m, c) = column_moments(&flat, d, 0..1, n);
    let block = MvnBlock::new(0, m, &c)?;
    let independent = match approach {
        Approach::Marginal => None,
        Approach::Joint => {
            let mut mean = Vec::with_capacity(d - 1);
            let mut sd = Vec::with_capacity(d - 1);
            for col in 1..d {
                let (m, c) = column_moments(&flat, d, col..col + 1, n);
                mean.push(m[0]);
                sd.push(c[(0, 0)].sqrt());
            }
            Some(IndependentNormals {
                offset: 1,
                mean,
                sd,
            })
        }
    };
    GaussianImportance::new(vec![block], independent)
}

/// Posterior draws, a moment-fitted `g` from an independent pilot sample,
/// and `draws` evaluated draws from each of them.
pub fn conjugate_evaluation(
    model: &ConjugateNormal,
    approach: Approach,
    draws: usize,
    pilot: usize,
    seed: u64,
    exec: Execution,
) -> Result<(EvaluatedDraws, GaussianImportance)> {
    let streams = make_streams(seed, 3)?;
    let pilot_draws = model.posterior_draws(approach, pilot, streams.child(2, 1)?.master_seed, exec);
    let g = fit_moment_importance(&pilot_draws, approach)?;
    let post = model.posterior_draws(approach, draws, streams.child(0, 1)?.master_seed, exec);
    let ev = evaluate_draws(
        &post,
        |x| model.log_target(approach, x),
        &g,
        draws,
        streams.child(1, 1)?.master_seed,
        exec,
    );
    Ok((ev, g))
}
