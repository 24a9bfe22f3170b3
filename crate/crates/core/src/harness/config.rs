//! Experiment configuration from CLI flags and an optional TOML file.
//!
//! Both sources produce a [`Settings`] of optional fields. They are merged
//! with the file taking precedence, every conflict is reported as a warning,
//! and the result is validated into a typed configuration before anything
//! runs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::latent::{ModelConfig, MwgSettings};
use crate::stats::BatchScheme;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub r_schedule: Option<String>,
    pub replicates: Option<usize>,
    pub batches: Option<usize>,
    pub batch_size: Option<usize>,
    pub p: Option<usize>,
    pub cases: Option<usize>,
    pub k: Option<usize>,
    pub quad_order: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub kept: Option<usize>,
}

macro_rules! merge_fields {
    ($cli:ident, $file:ident, $warn:ident, $($f:ident),*) => {
        Settings { $($f: {
            match (&$cli.$f, &$file.$f) {
                (Some(c), Some(f)) if c != f => {
                    $warn.push(format!(
                        "`{}` given on the command line ({:?}) and in the config file ({:?}); using the file value",
                        stringify!($f).replace('_', "-"), c, f
                    ));
                    Some(f.clone())
                }
                (_, Some(f)) => Some(f.clone()),
                (c, None) => c.clone(),
            }
        }),* }
    };
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// File values win; each disagreement yields one warning.
    pub fn merge(cli: &Settings, file: &Settings) -> (Settings, Vec<String>) {
        let mut warnings = Vec::new();
        let merged = merge_fields!(
            cli, file, warnings, seed, out, n, alpha, beta, r_schedule, replicates, batches, batch_size, p, cases,
            k, quad_order, burn_in, thin, kept
        );
        (merged, warnings)
    }
}

/// `start:end:step`, inclusive of `end` when it lies on the grid.
pub fn parse_r_schedule(text: &str) -> Result<Vec<usize>> {
    let bad = |m: &str| Error::config("r-schedule", format!("`{text}`: {m}"));
    let parts: Vec<&str> = text.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad("expected unsigned integers")))
        .collect::<Result<Vec<_>>>()?;
    match nums.as_slice() {
        [r] if *r > 0 => Ok(vec![*r]),
        [start, end, step] if *start > 0 && *step > 0 && start <= end => {
            Ok((*start..=*end).step_by(*step).collect())
        }
        [_] | [_, _, _] => Err(bad("need 0 < start ≤ end and step > 0")),
        _ => Err(bad("expected `R` or `start:end:step`")),
    }
}

fn positive(field: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(Error::config(field, "must be positive"))
    } else {
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaConfig {
    pub seed: u64,
    pub n: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r_schedule: Vec<usize>,
    pub replicates: usize,
    pub batches: usize,
}

impl BetaConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let lambda1 = s.alpha.unwrap_or(1.0);
        let lambda2 = s.beta.unwrap_or(2.0);
        for (f, v) in [("alpha", lambda1), ("beta", lambda2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(f, format!("Beta shape must be positive and finite, got {v}")));
            }
        }
        let batches = positive("batches", s.batches.unwrap_or(25))?;
        let r_schedule = parse_r_schedule(s.r_schedule.as_deref().unwrap_or("250000"))?;
        if let Some(&r) = r_schedule.iter().find(|&&r| r < 2 * batches) {
            return Err(Error::config("r-schedule", format!("R = {r} is too small for {batches} batches")));
        }
        if s.batch_size.is_some() {
            return Err(Error::config("batch-size", "beta-product splits each R evenly; use --batches"));
        }
        Ok(BetaConfig {
            seed: s.seed.unwrap_or(1),
            n: positive("n", s.n.unwrap_or(10))?,
            lambda1,
            lambda2,
            r_schedule,
            replicates: positive("replicates", s.replicates.unwrap_or(1))?,
            batches,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GllvmConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub burn_in: usize,
    pub thin: usize,
    pub kept: usize,
    pub quad_order: usize,
    pub scheme: BatchScheme,
}

impl GllvmConfig {
    /// Desk-scale defaults: 6 items, 100 cases, one factor, 2000 burn-in,
    /// thinning 5, 5000 kept draws in 25 batches of 200.
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let model = ModelConfig::new(s.p.unwrap_or(6), s.cases.unwrap_or(100), s.k.unwrap_or(1))?;
        let kept = positive("kept", s.kept.unwrap_or(5000))?;
        let thin = positive("thin", s.thin.unwrap_or(5))?;
        let burn_in = s.burn_in.unwrap_or(2000);
        let batches = positive("batches", s.batches.unwrap_or(25))?;
        let batch_size = match s.batch_size {
            Some(b) => positive("batch-size", b)?,
            None => kept / batches,
        };
        if batch_size == 0 || batches * batch_size > kept {
            return Err(Error::config(
                "batches",
                format!("{batches} batches of {batch_size} do not fit in {kept} kept draws"),
            ));
        }
        let quad_order = s.quad_order.unwrap_or(21);
        if quad_order == 0 || quad_order > crate::quadrature::MAX_ORDER {
            return Err(Error::config("quad-order", format!("must be in 1..={}", crate::quadrature::MAX_ORDER)));
        }
        let points = (quad_order as f64).powi(model.latent_dim as i32);
        if points > crate::quadrature::MAX_TENSOR_POINTS as f64 {
            return Err(Error::config("quad-order", format!("{quad_order}^{} nodes is too many", model.latent_dim)));
        }
        Ok(GllvmConfig {
            seed: s.seed.unwrap_or(1),
            model,
            burn_in,
            thin,
            kept,
            quad_order,
            scheme: BatchScheme::new(batches, batch_size)?,
        })
    }

    pub fn mwg(&self, seed: u64) -> Result<MwgSettings> {
        MwgSettings::keeping(self.kept, self.burn_in, self.thin, seed)
    }
}
