//! Marginal likelihood of the latent trait model from MCMC output.
//!
//! The joint approach targets `f(Y | θ, Z) π(θ) π(Z)` with `g` covering the
//! latent scores; the marginal approach targets `f(Y | θ) π(θ)` with the
//! latent scores integrated out by quadrature.

use super::{EvaluatedDraws, Estimator};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::latent::model::{case_loglik, case_marginal_logliks, log_prior_sampling, log_prior_z};
use crate::latent::{Dataset, GaussianImportance, ItemParams, ModelConfig, PosteriorDraws};
use crate::quadrature::QuadratureRule;
use crate::stats::{stream_rng, Approach, SampleBlock};

/// Per-case pieces of the joint target and of `g` at a set of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseTerms {
    pub cases: usize,
    /// `log f(Yᵢ | θ, Zᵢ) + log π(Zᵢ)`, `draws × cases`.
    pub log_target: Vec<f64>,
    /// `log g(Zᵢ)`, `draws × cases`.
    pub log_g: Vec<f64>,
    /// `log π(θ)` on the sampling scale.
    pub log_prior_theta: Vec<f64>,
    /// `log g(α) + log g(βₑ)`.
    pub log_g_theta: Vec<f64>,
}

impl CaseTerms {
    fn with_capacity(draws: usize, cases: usize) -> Self {
        CaseTerms {
            cases,
            log_target: Vec::with_capacity(draws * cases),
            log_g: Vec::with_capacity(draws * cases),
            log_prior_theta: Vec::with_capacity(draws),
            log_g_theta: Vec::with_capacity(draws),
        }
    }

    pub fn draws(&self) -> usize {
        self.log_prior_theta.len()
    }

    fn push(&mut self, d: DrawTerms) {
        self.log_target.extend_from_slice(&d.target);
        self.log_g.extend_from_slice(&d.g);
        self.log_prior_theta.push(d.prior_theta);
        self.log_g_theta.push(d.g_theta);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GllvmEvaluation {
    pub approach: Approach,
    pub draws: EvaluatedDraws,
    /// Present for the joint approach.
    pub posterior_cases: Option<CaseTerms>,
    pub g_cases: Option<CaseTerms>,
}

struct DrawTerms {
    target: Vec<f64>,
    g: Vec<f64>,
    prior_theta: f64,
    g_theta: f64,
    log_target: f64,
    log_g: f64,
}

fn joint_terms(cfg: &ModelConfig, data: &Dataset, g: &GaussianImportance, theta: &[f64], z: &[f64]) -> Result<DrawTerms> {
    let k = cfg.latent_dim;
    let params = ItemParams::from_sampling(cfg, theta)?;
    let target: Vec<f64> = (0..cfg.cases)
        .map(|i| {
            let zi = &z[i * k..(i + 1) * k];
            case_loglik(&params, zi, data.case(i)) + log_prior_z(zi)
        })
        .collect();
    let gz = g.latent_case_log_densities(z, k);
    let prior_theta = log_prior_sampling(cfg, theta);
    let g_theta = g.log_density_theta(theta);
    Ok(DrawTerms {
        log_target: target.iter().sum::<f64>() + prior_theta,
        log_g: gz.iter().sum::<f64>() + g_theta,
        target,
        g: gz,
        prior_theta,
        g_theta,
    })
}

fn marginal_terms(
    cfg: &ModelConfig,
    data: &Dataset,
    g: &GaussianImportance,
    rule: &QuadratureRule,
    theta: &[f64],
) -> Result<(f64, f64)> {
    let params = ItemParams::from_sampling(cfg, theta)?;
    let ll: f64 = case_marginal_logliks(&params, data, rule)?.iter().sum();
    Ok((ll + log_prior_sampling(cfg, theta), g.log_density_theta(theta)))
}

/// Evaluates posterior draws and an equal number of `g` draws (draw `r`
/// on stream `r` of `g_seed`).
pub fn evaluate_gllvm(
    data: &Dataset,
    draws: &PosteriorDraws,
    g: &GaussianImportance,
    approach: Approach,
    rule: Option<&QuadratureRule>,
    g_seed: u64,
    exec: Execution,
) -> Result<GllvmEvaluation> {
    let cfg = &draws.config;
    let d = cfg.theta_dim();
    let r = draws.draws;
    match approach {
        Approach::Joint => {
            if !g.has_latent() {
                return Err(Error::input("the joint approach needs an importance function with a latent block"));
            }
            let post = exec.try_map(r, |i| {
                joint_terms(cfg, data, g, draws.theta_row(i), draws.latent_row(i))
                    .map_err(|e| e.context(format!("posterior draw {i}")))
            })?;
            let gd = exec.try_map(r, |i| {
                let x = g.sample(&mut stream_rng(g_seed, i as u64));
                joint_terms(cfg, data, g, &x[..d], &x[d..]).map_err(|e| e.context(format!("g draw {i}")))
            })?;
            let mut ev = EvaluatedDraws::default();
            let mut pc = CaseTerms::with_capacity(r, cfg.cases);
            let mut gc = CaseTerms::with_capacity(r, cfg.cases);
            for t in post {
                ev.post_log_target.push(t.log_target);
                ev.post_log_g.push(t.log_g);
                pc.push(t);
            }
            for t in gd {
                ev.g_log_target.push(t.log_target);
                ev.g_log_g.push(t.log_g);
                gc.push(t);
            }
            Ok(GllvmEvaluation {
                approach,
                draws: ev,
                posterior_cases: Some(pc),
                g_cases: Some(gc),
            })
        }
        Approach::Marginal => {
            let rule = rule.ok_or_else(|| Error::input("the marginal approach needs a quadrature rule"))?;
            if g.theta_dim() != d {
                return Err(Error::input("importance function does not match the parameter dimension"));
            }
            let post = exec.try_map(r, |i| {
                marginal_terms(cfg, data, g, rule, draws.theta_row(i))
                    .map_err(|e| e.context(format!("posterior draw {i}")))
            })?;
            let gd = exec.try_map(r, |i| {
                let x = g.sample(&mut stream_rng(g_seed, i as u64));
                marginal_terms(cfg, data, g, rule, &x[..d]).map_err(|e| e.context(format!("g draw {i}")))
            })?;
            let (post_log_target, post_log_g) = post.into_iter().unzip();
            let (g_log_target, g_log_g) = gd.into_iter().unzip();
            Ok(GllvmEvaluation {
                approach,
                draws: EvaluatedDraws {
                    post_log_target,
                    post_log_g,
                    g_log_target,
                    g_log_g,
                },
                posterior_cases: None,
                g_cases: None,
            })
        }
    }
}

fn block_from_logs(logs: Vec<f64>, rows: usize, cols: usize) -> Result<SampleBlock> {
    SampleBlock::new(logs.into_iter().map(f64::exp).collect(), rows, cols)
}

fn per_case<F: Fn(f64, f64, f64, f64) -> f64>(t: &CaseTerms, f: F) -> Result<SampleBlock> {
    let n = t.cases;
    let nf = n as f64;
    let mut logs = Vec::with_capacity(t.draws() * n);
    for r in 0..t.draws() {
        let (pt, gt) = (t.log_prior_theta[r] / nf, t.log_g_theta[r] / nf);
        for i in 0..n {
            logs.push(f(t.log_target[r * n + i], t.log_g[r * n + i], pt, gt));
        }
    }
    block_from_logs(logs, t.draws(), n)
}

/// Per-case averaged variables whose row products are the estimator's
/// summands: the posterior-draw block for RM, and numerator (`g` draws) and
/// denominator (posterior draws) blocks for the bridge estimators.
pub fn joint_integrand_blocks(ev: &GllvmEvaluation, est: Estimator) -> Result<(SampleBlock, Option<SampleBlock>)> {
    let (Some(post), Some(gd)) = (&ev.posterior_cases, &ev.g_cases) else {
        return Err(Error::input("integrand blocks are defined for joint-approach evaluations only"));
    };
    match est {
        Estimator::Rm => Ok((per_case(post, |t, g, pt, gt| g - t + gt - pt)?, None)),
        Estimator::Bh => Ok((
            per_case(gd, |_, g, _, gt| -g - gt)?,
            Some(per_case(post, |t, _, pt, _| -t - pt)?),
        )),
        Estimator::Bg => Ok((
            per_case(gd, |t, g, pt, gt| 0.5 * (t - g + pt - gt))?,
            Some(per_case(post, |t, g, pt, gt| -0.5 * (t - g + pt - gt))?),
        )),
    }
}
