//! Metropolis-within-Gibbs sampler for the latent trait posterior.
//!
//! Each scan updates every intercept and free loading by a univariate random
//! walk (diagonal loadings on the log scale), then each subject's latent
//! vector as a block. Proposal scales follow a Robbins-Monro recursion toward
//! an acceptance rate of 0.3 during burn-in and are frozen afterwards.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::model::{
    bernoulli_logit_log_pmf, log_prior_sampling, normal_log_density, sampling_layout, Dataset, ItemParams,
    ModelConfig,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::stats::{stream_rng, StreamRng};

const TARGET_ACCEPTANCE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwgSettings {
    /// Total scans, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Power applied to the likelihood; `0` samples the prior.
    pub temperature: f64,
    pub seed: u64,
}

impl MwgSettings {
    pub fn new(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> Result<Self> {
        let s = MwgSettings {
            iterations,
            burn_in,
            thin,
            temperature: 1.0,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// Settings keeping `kept` draws after `burn_in` scans at thinning `thin`.
    pub fn keeping(kept: usize, burn_in: usize, thin: usize, seed: u64) -> Result<Self> {
        Self::new(burn_in + kept * thin.max(1), burn_in, thin, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::config("iterations", "must exceed burn-in"));
        }
        if self.thin == 0 {
            return Err(Error::config("thin", "must be at least 1"));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::config("temperature", "must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceRates {
    /// Per sampling-scale coordinate, post burn-in.
    pub theta: Vec<f64>,
    /// Per subject, post burn-in.
    pub latent: Vec<f64>,
}

impl AcceptanceRates {
    pub fn min(&self) -> f64 {
        self.theta.iter().chain(&self.latent).copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.theta.iter().chain(&self.latent).copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Thinned post-burn-in output. Parameters are stored on the sampling scale
/// (`log βⱼⱼ` in place of `βⱼⱼ`).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub config: ModelConfig,
    /// `draws × theta_dim`, row-major.
    pub theta: Vec<f64>,
    /// `draws × (cases · k)`, row-major.
    pub latent: Vec<f64>,
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub acceptance: AcceptanceRates,
}

impl PosteriorDraws {
    pub fn theta_row(&self, r: usize) -> &[f64] {
        let d = self.config.theta_dim();
        &self.theta[r * d..(r + 1) * d]
    }

    pub fn latent_row(&self, r: usize) -> &[f64] {
        let d = self.config.latent_len();
        &self.latent[r * d..(r + 1) * d]
    }

    pub fn params(&self, r: usize) -> ItemParams {
        ItemParams::from_sampling(&self.config, self.theta_row(r)).expect("stored draws have the configured shape")
    }

    /// Column `c` of the parameter draws.
    pub fn theta_column(&self, c: usize) -> Vec<f64> {
        let d = self.config.theta_dim();
        (0..self.draws).map(|r| self.theta[r * d + c]).collect()
    }
}

struct Scales {
    log_scale: Vec<f64>,
    accepted: Vec<u64>,
    tried: Vec<u64>,
}

impl Scales {
    fn new(n: usize, initial: f64) -> Self {
        Scales {
            log_scale: vec![initial.ln(); n],
            accepted: vec![0; n],
            tried: vec![0; n],
        }
    }

    fn scale(&self, i: usize) -> f64 {
        self.log_scale[i].exp()
    }

    fn record(&mut self, i: usize, accepted: bool, adapt_step: Option<f64>) {
        match adapt_step {
            Some(g) => {
                let a = if accepted { 1.0 } else { 0.0 };
                self.log_scale[i] = (self.log_scale[i] + g * (a - TARGET_ACCEPTANCE)).clamp(-12.0, 5.0);
            }
            None => {
                self.tried[i] += 1;
                self.accepted[i] += u64::from(accepted);
            }
        }
    }

    fn rates(&self) -> Vec<f64> {
        self.accepted
            .iter()
            .zip(&self.tried)
            .map(|(&a, &t)| if t == 0 { f64::NAN } else { a as f64 / t as f64 })
            .collect()
    }
}

fn item_loglik(data: &Dataset, z: &[f64], k: usize, j: usize, alpha: f64, row: &[f64]) -> f64 {
    (0..data.cases())
        .map(|i| {
            let zi = &z[i * k..(i + 1) * k];
            let eta = alpha + row.iter().zip(zi).map(|(b, z)| b * z).sum::<f64>();
            bernoulli_logit_log_pmf(data.get(i, j), eta)
        })
        .sum()
}

fn case_loglik_at(params: &ItemParams, zi: &[f64], responses: &[u8]) -> f64 {
    responses
        .iter()
        .enumerate()
        .map(|(j, &y)| bernoulli_logit_log_pmf(y, params.linear_predictor(j, zi)))
        .sum()
}

/// Runs one chain from `α = 0`, `β = I`-pattern, `Z = 0`.
pub fn mwg_sample(data: &Dataset, cfg: &ModelConfig, settings: &MwgSettings) -> Result<PosteriorDraws> {
    cfg.validate()?;
    settings.validate()?;
    if data.items() != cfg.items || data.cases() != cfg.cases {
        return Err(Error::input(format!(
            "dataset is {}×{}, model expects {}×{}",
            data.cases(),
            data.items(),
            cfg.cases,
            cfg.items
        )));
    }
    let (p, k, n) = (cfg.items, cfg.latent_dim, cfg.cases);
    let temp = settings.temperature;
    let layout = sampling_layout(cfg);
    let dim = cfg.theta_dim();
    let mut rng: StreamRng = stream_rng(settings.seed, 0);

    let mut theta = vec![0.0; dim];
    let mut params = ItemParams::from_sampling(cfg, &theta)?;
    let mut z = vec![0.0; n * k];
    let mut item_ll: Vec<f64> = (0..p)
        .map(|j| item_loglik(data, &z, k, j, params.alpha[j], &params.beta[j * k..(j + 1) * k]))
        .collect();

    let mut theta_scales = Scales::new(dim, 0.5);
    let mut z_scales = Scales::new(n, 1.0);

    let kept = settings.kept();
    let mut out_theta = Vec::with_capacity(kept * dim);
    let mut out_latent = Vec::with_capacity(kept * n * k);
    let mut row = vec![0.0; k];
    let mut proposal_z = vec![0.0; k];

    for iter in 0..settings.iterations {
        let adapt = (iter < settings.burn_in).then(|| 1.0 / ((iter + 1) as f64).powf(0.6));

        for c in 0..dim {
            let old = theta[c];
            let eps: f64 = StandardNormal.sample(&mut rng);
            let new = old + theta_scales.scale(c) * eps;
            let (j, prior_old, prior_new) = match layout[c] {
                None => (
                    c,
                    normal_log_density(old, 0.0, cfg.prior_sd_free),
                    normal_log_density(new, 0.0, cfg.prior_sd_free),
                ),
                Some((j, l)) if j == l => (
                    j,
                    normal_log_density(old, cfg.prior_logdiag_mean, cfg.prior_logdiag_sd),
                    normal_log_density(new, cfg.prior_logdiag_mean, cfg.prior_logdiag_sd),
                ),
                Some((j, _)) => (
                    j,
                    normal_log_density(old, 0.0, cfg.prior_sd_free),
                    normal_log_density(new, 0.0, cfg.prior_sd_free),
                ),
            };
            let alpha_new;
            match layout[c] {
                None => {
                    alpha_new = new;
                    row.copy_from_slice(&params.beta[j * k..(j + 1) * k]);
                }
                Some((_, l)) => {
                    alpha_new = params.alpha[j];
                    row.copy_from_slice(&params.beta[j * k..(j + 1) * k]);
                    row[l] = if l == j { new.exp() } else { new };
                }
            }
            let ll_new = if temp == 0.0 {
                0.0
            } else {
                item_loglik(data, &z, k, j, alpha_new, &row)
            };
            let log_ratio = temp * (ll_new - item_ll[j]) + prior_new - prior_old;
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                theta[c] = new;
                params.alpha[j] = alpha_new;
                params.beta[j * k..(j + 1) * k].copy_from_slice(&row);
                item_ll[j] = ll_new;
            }
            theta_scales.record(c, accept, adapt);
        }

        for i in 0..n {
            let zi = &z[i * k..(i + 1) * k];
            let s = z_scales.scale(i);
            for (q, &old) in proposal_z.iter_mut().zip(zi) {
                let eps: f64 = StandardNormal.sample(&mut rng);
                *q = old + s * eps;
            }
            let prior_diff: f64 = proposal_z.iter().zip(zi).map(|(a, b)| 0.5 * (b * b - a * a)).sum();
            let ll_diff = if temp == 0.0 {
                0.0
            } else {
                case_loglik_at(&params, &proposal_z, data.case(i)) - case_loglik_at(&params, zi, data.case(i))
            };
            let log_ratio = temp * ll_diff + prior_diff;
            let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            if accept {
                z[i * k..(i + 1) * k].copy_from_slice(&proposal_z);
            }
            z_scales.record(i, accept, adapt);
        }
        if temp != 0.0 {
            // Z moved: refresh the per-item cache.
            for (j, ll) in item_ll.iter_mut().enumerate() {
                *ll = item_loglik(data, &z, k, j, params.alpha[j], &params.beta[j * k..(j + 1) * k]);
            }
        }

        if iter >= settings.burn_in && (iter - settings.burn_in + 1) % settings.thin == 0 {
            out_theta.extend_from_slice(&theta);
            out_latent.extend_from_slice(&z);
        }
    }

    debug_assert!(log_prior_sampling(cfg, &theta).is_finite());
    Ok(PosteriorDraws {
        config: *cfg,
        draws: out_theta.len() / dim,
        theta: out_theta,
        latent: out_latent,
        burn_in: settings.burn_in,
        thin: settings.thin,
        acceptance: AcceptanceRates {
            theta: theta_scales.rates(),
            latent: z_scales.rates(),
        },
    })
}

/// Independent chains, chain `c` seeded from `(settings.seed, c)`.
pub fn mwg_chains(
    data: &Dataset,
    cfg: &ModelConfig,
    settings: &MwgSettings,
    chains: usize,
    exec: Execution,
) -> Result<Vec<PosteriorDraws>> {
    exec.try_map(chains, |c| {
        let mut s = *settings;
        s.seed = stream_rng(settings.seed, c as u64 + 1).random();
        mwg_sample(data, cfg, &s).map_err(|e| e.context(format!("chain {c}")))
    })
}
