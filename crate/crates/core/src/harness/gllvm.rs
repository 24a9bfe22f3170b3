//! Simulated latent trait study: data, MCMC, importance functions, the six
//! estimator/approach combinations, and covariation diagnostics.

use std::io::Write;

use super::config::GllvmConfig;
use super::fmt_opt;
use crate::bml::gllvm::{evaluate_gllvm, joint_integrand_blocks};
use crate::bml::{run_estimator, Batching, BmlRun, Estimator};
use crate::conditional::summarize_sorted;
use crate::covariation::{estimator_tci_diagnostics, BlockCovariation, TciDiagnostics};
use crate::error::Result;
use crate::exec::Execution;
use crate::latent::model::simulate_dataset;
use crate::latent::{fit_importance, mwg_sample, Dataset, ItemParams, PosteriorDraws};
use crate::quadrature::standard_normal_rule;
use crate::stats::{make_streams, moments, Approach, SampleBlock};

pub const GLLVM_COLUMNS: [&str; 7] = [
    "approach",
    "estimator",
    "pooled_log_estimate",
    "batch_mean",
    "mce",
    "batch_index",
    "batch_log_estimate",
];

pub const DIAGNOSTIC_COLUMNS: [&str; 10] = [
    "estimator",
    "block",
    "cv_min",
    "cv_median",
    "cv_max",
    "log_joint",
    "log_marginal",
    "log_effect",
    "tci",
    "net_log_effect",
];

/// Per-case coefficient of variation summary and covariation of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagnostics {
    pub cv_min: f64,
    pub cv_median: f64,
    pub cv_max: f64,
    pub covariation: BlockCovariation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorDiagnostics {
    pub estimator: Estimator,
    pub numerator: BlockDiagnostics,
    pub denominator: Option<BlockDiagnostics>,
    pub tci: TciDiagnostics,
}

#[derive(Debug, Clone)]
pub struct GllvmStudy {
    pub data: Dataset,
    pub truth: ItemParams,
    pub draws: PosteriorDraws,
    /// Joint runs first, then marginal; RM, BH, BG within each.
    pub runs: Vec<BmlRun>,
    pub diagnostics: Vec<EstimatorDiagnostics>,
}

impl GllvmStudy {
    pub fn run(&self, est: Estimator, approach: Approach) -> &BmlRun {
        self.runs
            .iter()
            .find(|r| r.estimator == est && r.approach == approach)
            .expect("every combination is run")
    }

    pub fn diagnostics(&self, est: Estimator) -> &EstimatorDiagnostics {
        self.diagnostics.iter().find(|d| d.estimator == est).expect("every estimator is diagnosed")
    }
}

/// `CV` of each column of a block, summarized over columns.
pub fn column_cv_summary(block: &SampleBlock) -> Result<(f64, f64, f64)> {
    let m = moments(block, 0.0)?;
    let mut cvs: Vec<f64> = m.cv.iter().flatten().copied().collect();
    cvs.sort_by(f64::total_cmp);
    Ok(summarize_sorted(&cvs))
}

fn block_diagnostics(block: &SampleBlock) -> Result<BlockDiagnostics> {
    let (cv_min, cv_median, cv_max) = column_cv_summary(block)?;
    Ok(BlockDiagnostics {
        cv_min,
        cv_median,
        cv_max,
        covariation: BlockCovariation::of(block),
    })
}

/// Streams: data `0`, sampler `1`, joint `g` draws `2`, marginal `g` draws `3`.
pub fn gllvm_experiment(cfg: &GllvmConfig, exec: Execution) -> Result<GllvmStudy> {
    let streams = make_streams(cfg.seed, 4)?;
    let seed_of = |i: u64| streams.child(i, 1).map(|s| s.master_seed);
    let (data, truth, _) = simulate_dataset(&cfg.model, seed_of(0)?).map_err(|e| e.context("simulating data"))?;
    let draws = mwg_sample(&data, &cfg.model, &cfg.mwg(seed_of(1)?)?).map_err(|e| e.context("posterior sampling"))?;
    let rule = standard_normal_rule(cfg.quad_order, cfg.model.latent_dim)?;

    let mut runs = Vec::with_capacity(6);
    let mut diagnostics = Vec::with_capacity(3);
    for (approach, stream) in [(Approach::Joint, 2), (Approach::Marginal, 3)] {
        let g = fit_importance(&draws, approach).map_err(|e| e.context(format!("fitting g ({approach})")))?;
        let ev = evaluate_gllvm(&data, &draws, &g, approach, Some(&rule), seed_of(stream)?, exec)
            .map_err(|e| e.context(format!("evaluating draws ({approach})")))?;
        for est in Estimator::ALL {
            runs.push(
                run_estimator(&ev.draws, est, approach, &cfg.scheme, Batching::Contiguous, exec)
                    .map_err(|e| e.context(format!("{est}_{approach}")))?,
            );
            if approach == Approach::Joint {
                // Diagnostics use the same draws as the batches.
                let (num, den) = joint_integrand_blocks(&ev, est)?;
                let rows = 0..cfg.scheme.covered();
                let num = num.slice_rows(rows.clone())?;
                let den = den.map(|d| d.slice_rows(rows)).transpose()?;
                diagnostics.push(EstimatorDiagnostics {
                    estimator: est,
                    numerator: block_diagnostics(&num)?,
                    denominator: den.as_ref().map(block_diagnostics).transpose()?,
                    tci: estimator_tci_diagnostics(&num, den.as_ref()),
                });
            }
        }
    }
    Ok(GllvmStudy {
        data,
        truth,
        draws,
        runs,
        diagnostics,
    })
}

/// One row per `(approach, estimator, batch)`, pooled columns repeated.
pub fn write_gllvm_csv<W: Write>(study: &GllvmStudy, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(GLLVM_COLUMNS)?;
    for run in &study.runs {
        let row = run.row();
        for (b, est) in run.batch_log_estimates.iter().enumerate() {
            wr.write_record([
                row.approach.to_string(),
                row.estimator.to_string(),
                row.pooled_log_estimate.to_string(),
                row.batch_mean.to_string(),
                fmt_opt(row.mce),
                (b + 1).to_string(),
                est.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv<W: Write>(study: &GllvmStudy, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(DIAGNOSTIC_COLUMNS)?;
    for d in &study.diagnostics {
        let blocks = [("numerator", Some(&d.numerator)), ("denominator", d.denominator.as_ref())];
        for (name, b) in blocks {
            let Some(b) = b else { continue };
            wr.write_record([
                d.estimator.to_string(),
                name.to_string(),
                b.cv_min.to_string(),
                b.cv_median.to_string(),
                b.cv_max.to_string(),
                b.covariation.log_joint.to_string(),
                b.covariation.log_marginal.to_string(),
                b.covariation.log_effect.to_string(),
                format!("{:e}", b.covariation.tci),
                d.tci.net_log_effect.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}
