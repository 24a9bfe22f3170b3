//! Products of independent Beta variables, where the truth is known:
//! `E[ΠᵢXᵢ] = (λ₁/(λ₁+λ₂))ᴺ`.

use std::io::Write;

use rand_distr::{Beta, Distribution};

use super::config::BetaConfig;
use super::fmt_opt;
use crate::covariation::tci_sample;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::product::estimate_report;
use crate::stats::{make_streams, stream_rng, Approach, BatchScheme, SampleBlock};

const ROW_CHUNK: usize = 4096;

pub const BETA_COLUMNS: [&str; 12] = [
    "experiment",
    "seed",
    "N",
    "lambda1",
    "lambda2",
    "R",
    "log_truth",
    "log_joint",
    "log_marginal",
    "mce_joint",
    "mce_marginal",
    "tci",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BetaRow {
    pub seed: u64,
    pub n: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r: usize,
    pub log_truth: f64,
    pub log_joint: f64,
    pub log_marginal: f64,
    pub mce_joint: Option<f64>,
    pub mce_marginal: Option<f64>,
    pub tci: f64,
}

impl BetaRow {
    fn record(&self) -> Vec<String> {
        vec![
            "beta-product".to_string(),
            self.seed.to_string(),
            self.n.to_string(),
            self.lambda1.to_string(),
            self.lambda2.to_string(),
            self.r.to_string(),
            self.log_truth.to_string(),
            self.log_joint.to_string(),
            self.log_marginal.to_string(),
            fmt_opt(self.mce_joint),
            fmt_opt(self.mce_marginal),
            format!("{:e}", self.tci),
        ]
    }
}

pub fn beta_log_truth(n: usize, lambda1: f64, lambda2: f64) -> f64 {
    n as f64 * (lambda1 / (lambda1 + lambda2)).ln()
}

/// `R × N` i.i.d. `Beta(λ₁, λ₂)` draws; rows `[c·4096, (c+1)·4096)` come
/// from stream `c` of `seed`.
pub fn beta_block(n: usize, lambda1: f64, lambda2: f64, r: usize, seed: u64, exec: Execution) -> Result<SampleBlock> {
    let dist = Beta::new(lambda1, lambda2).map_err(|e| Error::input(format!("Beta({lambda1}, {lambda2}): {e}")))?;
    let mut values = vec![0.0; r * n];
    exec.for_each_chunk(&mut values, ROW_CHUNK * n, |c, chunk| {
        let mut rng = stream_rng(seed, c as u64);
        chunk.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    });
    SampleBlock::new(values, r, n)
}

/// One replicate at sample size `r`.
pub fn beta_cell(
    n: usize,
    lambda1: f64,
    lambda2: f64,
    r: usize,
    batches: usize,
    seed: u64,
    exec: Execution,
) -> Result<BetaRow> {
    let block = beta_block(n, lambda1, lambda2, r, seed, exec)?;
    let scheme = BatchScheme::even(r, batches)?;
    let joint = estimate_report(&block, Approach::Joint, &scheme)?;
    let marginal = estimate_report(&block, Approach::Marginal, &scheme)?;
    Ok(BetaRow {
        seed,
        n,
        lambda1,
        lambda2,
        r,
        log_truth: beta_log_truth(n, lambda1, lambda2),
        log_joint: joint.log_estimate,
        log_marginal: marginal.log_estimate,
        mce_joint: joint.mce,
        mce_marginal: marginal.mce,
        tci: tci_sample(&block),
    })
}

/// One row per `(R, replicate)`, in schedule order, replicates innermost.
pub fn beta_product_experiment(cfg: &BetaConfig, exec: Execution) -> Result<Vec<BetaRow>> {
    let cells = cfg.r_schedule.len() * cfg.replicates;
    let streams = make_streams(cfg.seed, cells as u64)?;
    let mut rows = Vec::with_capacity(cells);
    for (ri, &r) in cfg.r_schedule.iter().enumerate() {
        for rep in 0..cfg.replicates {
            let cell = (ri * cfg.replicates + rep) as u64;
            let seed = streams.child(cell, 1)?.master_seed;
            let mut row = beta_cell(cfg.n, cfg.lambda1, cfg.lambda2, r, cfg.batches, seed, exec)
                .map_err(|e| e.context(format!("R = {r}, replicate {rep}")))?;
            row.seed = cfg.seed;
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_beta_csv<W: Write>(rows: &[BetaRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(BETA_COLUMNS)?;
    for row in rows {
        wr.write_record(row.record())?;
    }
    wr.flush()?;
    Ok(())
}
