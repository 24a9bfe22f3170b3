//! Marginal likelihood estimators from posterior and importance draws.
//!
//! With `h(ϑ) = log f(Y|ϑ) + log π(ϑ) − log g(ϑ)`:
//!
//! ```text
//! RM:  log f̂ = −log mean_post exp(−h)
//! BH:  log f̂ = log mean_g exp(−log g) − log mean_post exp(−log fπ)
//! BG:  log f̂ = log mean_g exp(h/2) − log mean_post exp(−h/2)
//! ```
//!
//! Every mean is a log-sum-exp. Batches partition the draws; the pooled
//! estimate uses exactly the draws covered by the batches.

pub mod conjugate;
pub mod gllvm;

use std::fmt;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::logspace::log_mean_exp;
use crate::stats::{batch_mce, stream_rng, Approach, BatchScheme, EstimateReport, Method, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Rm,
    Bh,
    Bg,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Rm, Estimator::Bh, Estimator::Bg];

    pub fn method(self, approach: Approach) -> Method {
        match self {
            Estimator::Rm => Method::Rm(approach),
            Estimator::Bh => Method::Bh(approach),
            Estimator::Bg => Method::Bg(approach),
        }
    }

    /// Whether the estimator needs draws from `g`.
    pub fn uses_g_sample(self) -> bool {
        self != Estimator::Rm
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Rm => "RM",
            Estimator::Bh => "BH",
            Estimator::Bg => "BG",
        })
    }
}

/// An importance density that can be sampled and evaluated.
pub trait Importance: Sync {
    fn log_density(&self, x: &[f64]) -> f64;
    fn sample(&self, rng: &mut StreamRng) -> Vec<f64>;
}

impl Importance for crate::latent::GaussianImportance {
    fn log_density(&self, x: &[f64]) -> f64 {
        crate::latent::GaussianImportance::log_density(self, x)
    }

    fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        crate::latent::GaussianImportance::sample(self, rng)
    }
}

/// `log fπ` and `log g` at every posterior draw and every `g` draw.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluatedDraws {
    pub post_log_target: Vec<f64>,
    pub post_log_g: Vec<f64>,
    pub g_log_target: Vec<f64>,
    pub g_log_g: Vec<f64>,
}

impl EvaluatedDraws {
    pub fn posterior_len(&self) -> usize {
        self.post_log_target.len()
    }

    pub fn g_len(&self) -> usize {
        self.g_log_target.len()
    }
}

/// Evaluates `log_target` and `g` at the given posterior draws and at `g`
/// draws sampled from `seed`, draw `r` on stream `r`.
pub fn evaluate_draws<P, T, G>(
    posterior: &[P],
    log_target: T,
    g: &G,
    g_draws: usize,
    seed: u64,
    exec: Execution,
) -> EvaluatedDraws
where
    P: AsRef<[f64]> + Sync,
    T: Fn(&[f64]) -> f64 + Sync + Send,
    G: Importance,
{
    let post: Vec<(f64, f64)> = exec.map(posterior.len(), |r| {
        let x = posterior[r].as_ref();
        (log_target(x), g.log_density(x))
    });
    let gd: Vec<(f64, f64)> = exec.map(g_draws, |r| {
        let x = g.sample(&mut stream_rng(seed, r as u64));
        (log_target(&x), g.log_density(&x))
    });
    let (post_log_target, post_log_g) = post.into_iter().unzip();
    let (g_log_target, g_log_g) = gd.into_iter().unzip();
    EvaluatedDraws {
        post_log_target,
        post_log_g,
        g_log_target,
        g_log_g,
    }
}

fn checked(values: Vec<f64>, what: &str, indices: &[usize]) -> Result<Vec<f64>> {
    for (pos, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::non_finite(format!("{what} draw {}", indices[pos]), *v));
        }
    }
    Ok(values)
}

/// `log mean exp(a)` over numerator summands minus `log mean exp(b)` over
/// denominator summands.
fn log_ratio_of_means(num: &[f64], den: &[f64]) -> f64 {
    log_mean_exp(num) - log_mean_exp(den)
}

/// `log mean_g exp(h_g/2) − log mean_post exp(−h_post/2)`.
pub fn bridge_geometric(h_g: &[f64], h_post: &[f64]) -> f64 {
    let num: Vec<f64> = h_g.iter().map(|h| 0.5 * h).collect();
    let den: Vec<f64> = h_post.iter().map(|h| -0.5 * h).collect();
    log_ratio_of_means(&num, &den)
}

/// Log estimate from the draws at `indices` (same indices in both samples).
pub fn log_estimate_at(ev: &EvaluatedDraws, est: Estimator, indices: &[usize]) -> Result<f64> {
    let post = |f: &dyn Fn(usize) -> f64, what: &str| checked(indices.iter().map(|&r| f(r)).collect(), what, indices);
    match est {
        Estimator::Rm => {
            let s = post(&|r| ev.post_log_g[r] - ev.post_log_target[r], "posterior")?;
            Ok(-log_mean_exp(&s))
        }
        Estimator::Bh => {
            let num = post(&|r| -ev.g_log_g[r], "g")?;
            let den = post(&|r| -ev.post_log_target[r], "posterior")?;
            Ok(log_ratio_of_means(&num, &den))
        }
        Estimator::Bg => {
            let hg = post(&|r| ev.g_log_target[r] - ev.g_log_g[r], "g")?;
            let hp = post(&|r| ev.post_log_target[r] - ev.post_log_g[r], "posterior")?;
            Ok(bridge_geometric(&hg, &hp))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Batching {
    #[default]
    Contiguous,
    Shuffled(u64),
}

/// One estimator/approach pair evaluated on a batch partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BmlRun {
    pub estimator: Estimator,
    pub approach: Approach,
    pub scheme: BatchScheme,
    pub batch_log_estimates: Vec<f64>,
    pub report: EstimateReport,
}

impl BmlRun {
    pub fn batch_mean(&self) -> f64 {
        self.batch_log_estimates.iter().sum::<f64>() / self.batch_log_estimates.len() as f64
    }

    pub fn row(&self) -> BatchRow {
        batch_report(self)
    }
}

pub fn run_estimator(
    ev: &EvaluatedDraws,
    est: Estimator,
    approach: Approach,
    scheme: &BatchScheme,
    batching: Batching,
    exec: Execution,
) -> Result<BmlRun> {
    let available = if est.uses_g_sample() {
        ev.posterior_len().min(ev.g_len())
    } else {
        ev.posterior_len()
    };
    let parts: Vec<Vec<usize>> = match batching {
        Batching::Contiguous => scheme.ranges(available)?.into_iter().map(|r| r.collect()).collect(),
        Batching::Shuffled(seed) => scheme.shuffled_indices(available, seed)?,
    };
    let batch_log_estimates = exec
        .try_map(parts.len(), |b| {
            log_estimate_at(ev, est, &parts[b]).map_err(|e| e.context(format!("batch {b}")))
        })?;
    let all: Vec<usize> = parts.concat();
    let pooled = log_estimate_at(ev, est, &all)?;
    let mut report = EstimateReport::from_signed(
        crate::logspace::LogSigned::from_log(pooled),
        est.method(approach),
        all.len(),
    );
    report.batches = scheme.batches;
    report.mce = if parts.len() >= 2 {
        Some(batch_mce(&batch_log_estimates)?)
    } else {
        None
    };
    Ok(BmlRun {
        estimator: est,
        approach,
        scheme: *scheme,
        batch_log_estimates,
        report,
    })
}

pub fn rm_estimate(ev: &EvaluatedDraws, approach: Approach, scheme: &BatchScheme) -> Result<BmlRun> {
    run_estimator(ev, Estimator::Rm, approach, scheme, Batching::Contiguous, Execution::default())
}

pub fn bh_estimate(ev: &EvaluatedDraws, approach: Approach, scheme: &BatchScheme) -> Result<BmlRun> {
    run_estimator(ev, Estimator::Bh, approach, scheme, Batching::Contiguous, Execution::default())
}

pub fn bg_estimate(ev: &EvaluatedDraws, approach: Approach, scheme: &BatchScheme) -> Result<BmlRun> {
    run_estimator(ev, Estimator::Bg, approach, scheme, Batching::Contiguous, Execution::default())
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub approach: Approach,
    pub estimator: Estimator,
    pub pooled_log_estimate: f64,
    pub batch_mean: f64,
    /// `None` (written as `NA`) with a single batch.
    pub mce: Option<f64>,
}

pub fn batch_report(run: &BmlRun) -> BatchRow {
    BatchRow {
        approach: run.approach,
        estimator: run.estimator,
        pooled_log_estimate: run.report.log_estimate,
        batch_mean: run.batch_mean(),
        mce: run.report.mce,
    }
}
