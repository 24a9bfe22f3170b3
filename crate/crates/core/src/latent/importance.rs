//! Gaussian importance functions fitted to posterior output.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::model::ModelConfig;
use super::sampler::PosteriorDraws;
use crate::error::{Error, Result};
use crate::stats::{Approach, StreamRng};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const JITTER_START: f64 = 1e-10;
const JITTER_TRIES: usize = 12;

/// Multivariate normal on a contiguous slice of the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnBlock {
    pub offset: usize,
    pub mean: Vec<f64>,
    /// Lower Cholesky factor, row-major `d × d`.
    chol: Vec<f64>,
    log_det_chol: f64,
    /// Diagonal jitter that was needed to make the covariance positive definite.
    pub jitter: f64,
}

impl MvnBlock {
    /// From a mean and a symmetric covariance, adding the smallest diagonal
    /// jitter from a geometric ladder that makes the Cholesky factor exist.
    pub fn new(offset: usize, mean: Vec<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::input("covariance shape does not match the mean"));
        }
        if cov.iter().any(|v| !v.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("importance block moments", f64::NAN));
        }
        let scale = (cov.diagonal().sum() / d as f64).max(1.0);
        let mut jitter = 0.0;
        for attempt in 0..=JITTER_TRIES {
            let mut m = cov.clone();
            for i in 0..d {
                m[(i, i)] += jitter;
            }
            if let Some(ch) = m.cholesky() {
                let l = ch.l();
                let log_det_chol = (0..d).map(|i| l[(i, i)].ln()).sum();
                let chol = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect();
                return Ok(MvnBlock {
                    offset,
                    mean,
                    chol,
                    log_det_chol,
                    jitter,
                });
            }
            jitter = JITTER_START * scale * 10f64.powi(attempt as i32);
        }
        Err(Error::Degenerate(format!(
            "covariance block at offset {offset} is not positive definite after jitter {jitter:e}"
        )))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.chol[i * self.dim() + j]
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        // Forward substitution L u = x − m.
        let mut u = vec![0.0; d];
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for j in 0..i {
                s -= self.l(i, j) * u[j];
            }
            u[i] = s / self.l(i, i);
            q += u[i] * u[i];
        }
        -0.5 * (d as f64 * LN_2PI + q) - self.log_det_chol
    }

    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let d = self.dim();
        let e: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for i in 0..d {
            out[i] = self.mean[i] + (0..=i).map(|j| self.l(i, j) * e[j]).sum::<f64>();
        }
    }

    pub fn entropy(&self) -> f64 {
        0.5 * self.dim() as f64 * (1.0 + LN_2PI) + self.log_det_chol
    }
}

/// Independent normals on the tail of the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentNormals {
    pub offset: usize,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl IndependentNormals {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| {
                let z = (x - m) / s;
                -0.5 * (LN_2PI + z * z) - s.ln()
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.sd.iter().map(|s| 0.5 * (1.0 + LN_2PI) + s.ln()).sum()
    }
}

/// `g(ϑ)`: a product of Gaussian blocks over a flat parameter vector, with an
/// optional block of independent normals (the latent scores).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianImportance {
    pub blocks: Vec<MvnBlock>,
    pub independent: Option<IndependentNormals>,
    dim: usize,
}

impl GaussianImportance {
    pub fn new(blocks: Vec<MvnBlock>, independent: Option<IndependentNormals>) -> Result<Self> {
        let mut next = 0;
        for b in &blocks {
            if b.offset != next {
                return Err(Error::input("importance blocks must tile the vector contiguously"));
            }
            next += b.dim();
        }
        if let Some(ind) = &independent {
            if ind.offset != next || ind.mean.len() != ind.sd.len() {
                return Err(Error::input("independent block must follow the Gaussian blocks"));
            }
            if ind.sd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                return Err(Error::input("independent block needs positive finite sds"));
            }
            next += ind.mean.len();
        }
        Ok(GaussianImportance {
            blocks,
            independent,
            dim: next,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_latent(&self) -> bool {
        self.independent.is_some()
    }

    /// Dimension of the leading (non-latent) part.
    pub fn theta_dim(&self) -> usize {
        self.blocks.iter().map(MvnBlock::dim).sum()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut total = self.log_density_theta(&x[..self.theta_dim()]);
        if let Some(ind) = &self.independent {
            total += ind.log_density(&x[ind.offset..]);
        }
        total
    }

    pub fn log_density_theta(&self, theta: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.log_density(&theta[b.offset..b.offset + b.dim()]))
            .sum()
    }

    /// Per-case log densities of the latent block, `k` scores per case.
    pub fn latent_case_log_densities(&self, z: &[f64], k: usize) -> Vec<f64> {
        let ind = self.independent.as_ref().expect("latent block present");
        z.chunks(k)
            .enumerate()
            .map(|(i, zi)| {
                IndependentNormals {
                    offset: 0,
                    mean: ind.mean[i * k..(i + 1) * k].to_vec(),
                    sd: ind.sd[i * k..(i + 1) * k].to_vec(),
                }
                .log_density(zi)
            })
            .collect()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for b in &self.blocks {
            b.sample_into(rng, &mut out[b.offset..b.offset + b.dim()]);
        }
        if let Some(ind) = &self.independent {
            for (i, (m, s)) in ind.mean.iter().zip(&ind.sd).enumerate() {
                let e: f64 = StandardNormal.sample(rng);
                out[ind.offset + i] = m + s * e;
            }
        }
        out
    }

    pub fn entropy(&self) -> f64 {
        self.blocks.iter().map(MvnBlock::entropy).sum::<f64>()
            + self.independent.as_ref().map_or(0.0, IndependentNormals::entropy)
    }
}

/// Mean and divisor-`(n−1)` covariance of columns `cols` of the first `n`
/// rows of a row-major matrix with row length `stride`.
pub fn column_moments(rows: &[f64], stride: usize, cols: std::ops::Range<usize>, n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let d = cols.len();
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (a, c) in cols.clone().enumerate() {
            mean[a] += rows[r * stride + c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut dev = DVector::<f64>::zeros(d);
    for r in 0..n {
        for (a, c) in cols.clone().enumerate() {
            dev[a] = rows[r * stride + c] - mean[a];
        }
        cov.ger(1.0, &dev, &dev, 1.0);
    }
    cov /= (n - 1) as f64;
    (mean, cov)
}

/// Fits `g` from posterior output: one Gaussian block for the intercepts and
/// one for the free loadings (log-diagonal scale). In the joint approach the
/// latent scores get independent normals with their posterior means and sds.
pub fn fit_importance(draws: &PosteriorDraws, approach: Approach) -> Result<GaussianImportance> {
    let n = draws.draws;
    if n < 2 {
        return Err(Error::input("fitting an importance function needs at least two draws"));
    }
    let cfg: &ModelConfig = &draws.config;
    let p = cfg.items;
    let dim = cfg.theta_dim();
    let (ma, ca) = column_moments(&draws.theta, dim, 0..p, n);
    let (mb, cb) = column_moments(&draws.theta, dim, p..dim, n);
    let blocks = vec![MvnBlock::new(0, ma, &ca)?, MvnBlock::new(p, mb, &cb)?];
    let independent = match approach {
        Approach::Marginal => None,
        Approach::Joint => {
            let len = cfg.latent_len();
            let mut mean = vec![0.0; len];
            let mut m2 = vec![0.0; len];
            for r in 0..n {
                for (c, &v) in draws.latent_row(r).iter().enumerate() {
                    mean[c] += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            for r in 0..n {
                for (c, &v) in draws.latent_row(r).iter().enumerate() {
                    m2[c] += (v - mean[c]).powi(2);
                }
            }
            let sd = m2
                .iter()
                .map(|s| (s / (n - 1) as f64 + JITTER_START).sqrt())
                .collect();
            Some(IndependentNormals {
                offset: dim,
                mean,
                sd,
            })
        }
    };
    GaussianImportance::new(blocks, independent)
}
