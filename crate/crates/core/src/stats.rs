//! Sample containers, moment summaries, seeded random streams and
//! batch-means Monte Carlo error.

use std::fmt;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::logspace::LogSigned;

/// The generator behind every stream in the crate.
pub type StreamRng = ChaCha8Rng;

/// An `R × N` matrix of evaluated integrand factors: row `r` holds
/// `φ₁(y₁⁽ʳ⁾), …, φ_N(y_N⁽ʳ⁾)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl SampleBlock {
    /// Builds a block from row-major values.
    pub fn new(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::input(format!(
                "sample block must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::input(format!(
                "expected {} values for a {rows}x{cols} block, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite(
                format!("row {}, column {}", pos / cols, pos % cols),
                values[pos],
            ));
        }
        Ok(SampleBlock { values, rows, cols })
    }

    pub fn from_rows<Row: AsRef<[f64]>>(rows: &[Row]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some((i, _)) = rows
            .iter()
            .enumerate()
            .find(|(_, r)| r.as_ref().len() != cols)
        {
            return Err(Error::input(format!("row {i} has a different length")));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(values, rows.len(), cols)
    }

    pub fn from_columns<Col: AsRef<[f64]>>(columns: &[Col]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        if columns.iter().any(|c| c.as_ref().len() != rows) {
            return Err(Error::input("columns have different lengths"));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            values.extend(columns.iter().map(|c| c.as_ref()[r]));
        }
        Self::new(values, rows, cols)
    }

    /// Number of replications `R`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of factors `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, i: usize) -> f64 {
        self.values[r * self.cols + i]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Contiguous sub-block of rows.
    pub fn slice_rows(&self, range: Range<usize>) -> Result<SampleBlock> {
        if range.start >= range.end || range.end > self.rows {
            return Err(Error::input(format!(
                "row range {range:?} invalid for {} rows",
                self.rows
            )));
        }
        let values = self.values[range.start * self.cols..range.end * self.cols].to_vec();
        Ok(SampleBlock {
            values,
            rows: range.len(),
            cols: self.cols,
        })
    }

    /// Sub-block made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<SampleBlock> {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            if r >= self.rows {
                return Err(Error::input(format!("row {r} out of range")));
            }
            values.extend_from_slice(self.row(r));
        }
        Self::new(values, rows.len(), self.cols)
    }

    /// Sub-block made of the given columns.
    pub fn select_columns(&self, cols: &[usize]) -> Result<SampleBlock> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::input(format!("column {c} out of range")));
        }
        let mut values = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            values.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        Self::new(values, self.rows, cols.len())
    }

    /// Row products `Πᵢ φᵢ` in sign-tracked log form.
    pub fn log_row_products(&self) -> Vec<LogSigned> {
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .fold(LogSigned::ONE, |acc, &x| acc * LogSigned::from_f64(x))
            })
            .collect()
    }

    /// Row products of the leading `k` columns, in linear space.
    pub fn partial_row_products(&self, k: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r)[..k].iter().product())
            .collect()
    }
}

/// Per-column moments used by every variance formula.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    /// Column means `Eᵢ`.
    pub mean: Vec<f64>,
    /// Column variances `Vᵢ` (divisor `R` for sample moments).
    pub var: Vec<f64>,
    /// `CVᵢ = √Vᵢ / |Eᵢ|`, `None` for zero-mean factors.
    pub cv: Vec<Option<f64>>,
    /// Indices with `|Eᵢ| ≤ zero_tol`, ascending.
    pub zero_mean: Vec<usize>,
    pub zero_tol: f64,
    /// Number of replications the moments were computed from, if sample-based.
    pub rows: Option<usize>,
}

impl MomentSummary {
    /// Builds a summary from known (for instance analytic) moments.
    pub fn from_moments(mean: Vec<f64>, var: Vec<f64>, zero_tol: f64) -> Result<Self> {
        if mean.is_empty() || mean.len() != var.len() {
            return Err(Error::input(format!(
                "need equal, nonzero numbers of means and variances ({} vs {})",
                mean.len(),
                var.len()
            )));
        }
        if !(zero_tol >= 0.0) || !zero_tol.is_finite() {
            return Err(Error::input(format!("zero_tol must be finite and >= 0, got {zero_tol}")));
        }
        for (i, (&e, &v)) in mean.iter().zip(&var).enumerate() {
            if !e.is_finite() {
                return Err(Error::non_finite(format!("mean {i}"), e));
            }
            if !v.is_finite() {
                return Err(Error::non_finite(format!("variance {i}"), v));
            }
            if v < 0.0 {
                return Err(Error::input(format!("variance {i} is negative: {v}")));
            }
        }
        let zero_mean: Vec<usize> = (0..mean.len())
            .filter(|&i| mean[i].abs() <= zero_tol)
            .collect();
        let cv = mean
            .iter()
            .zip(&var)
            .map(|(&e, &v)| (e.abs() > zero_tol).then(|| v.sqrt() / e.abs()))
            .collect();
        Ok(MomentSummary {
            mean,
            var,
            cv,
            zero_mean,
            zero_tol,
            rows: None,
        })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn is_zero_mean(&self, i: usize) -> bool {
        self.zero_mean.binary_search(&i).is_ok()
    }

    /// Variances rescaled to divisor `R - 1`. Reporting only; the identities
    /// in this crate are stated with divisor `R`.
    pub fn unbiased_var(&self) -> Option<Vec<f64>> {
        match self.rows {
            Some(r) if r > 1 => {
                let f = r as f64 / (r as f64 - 1.0);
                Some(self.var.iter().map(|v| v * f).collect())
            }
            _ => None,
        }
    }
}

/// Default zero tolerance: `1e-12 · maxᵢ |Eᵢ|`.
pub const DEFAULT_RELATIVE_ZERO_TOL: f64 = 1e-12;

/// Column means and divisor-`R` variances with an absolute zero tolerance.
pub fn moments(block: &SampleBlock, zero_tol: f64) -> Result<MomentSummary> {
    let (mean, var) = column_moments(block);
    let mut m = MomentSummary::from_moments(mean, var, zero_tol)?;
    m.rows = Some(block.rows());
    Ok(m)
}

/// [`moments`] with the tolerance set relative to the largest column mean.
pub fn moments_default(block: &SampleBlock) -> Result<MomentSummary> {
    let (mean, var) = column_moments(block);
    let scale = mean.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let mut m = MomentSummary::from_moments(mean, var, DEFAULT_RELATIVE_ZERO_TOL * scale)?;
    m.rows = Some(block.rows());
    Ok(m)
}

fn column_moments(block: &SampleBlock) -> (Vec<f64>, Vec<f64>) {
    let r = block.rows() as f64;
    let n = block.cols();
    let mut mean = vec![0.0; n];
    for row in 0..block.rows() {
        for (m, x) in mean.iter_mut().zip(block.row(row)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= r);
    let mut var = vec![0.0; n];
    for row in 0..block.rows() {
        for ((v, x), m) in var.iter_mut().zip(block.row(row)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= r);
    (mean, var)
}

/// Divisor-`R` mean and variance of a single series.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v)
}

/// Divisor-`R` covariance of two equally long series.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / n
}

/// Sample standard deviation (divisor `B - 1`) of per-batch log estimates.
pub fn batch_mce(batch_log_estimates: &[f64]) -> Result<f64> {
    let b = batch_log_estimates.len();
    if b < 2 {
        return Err(Error::input(format!("batch MCE needs at least 2 batches, got {b}")));
    }
    if let Some(i) = batch_log_estimates.iter().position(|x| !x.is_finite()) {
        return Err(Error::non_finite(
            format!("batch {i}"),
            batch_log_estimates[i],
        ));
    }
    let m = batch_log_estimates.iter().sum::<f64>() / b as f64;
    let ss: f64 = batch_log_estimates.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (b as f64 - 1.0)).sqrt())
}

/// How a series of draws is partitioned into batches for MCE estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchScheme {
    pub batches: usize,
    pub batch_size: usize,
}

impl BatchScheme {
    pub fn new(batches: usize, batch_size: usize) -> Result<Self> {
        if batches == 0 || batch_size == 0 {
            return Err(Error::input("batch count and batch size must be positive"));
        }
        Ok(BatchScheme {
            batches,
            batch_size,
        })
    }

    /// `batches` equal batches covering as much of `total` as divides evenly.
    pub fn even(total: usize, batches: usize) -> Result<Self> {
        if batches == 0 || total < batches {
            return Err(Error::input(format!(
                "cannot split {total} draws into {batches} batches"
            )));
        }
        Self::new(batches, total / batches)
    }

    pub fn covered(&self) -> usize {
        self.batches * self.batch_size
    }

    /// Contiguous, disjoint row ranges in iteration order.
    pub fn ranges(&self, total: usize) -> Result<Vec<Range<usize>>> {
        if self.covered() > total {
            return Err(Error::input(format!(
                "{} batches of {} need {} draws, only {total} available",
                self.batches,
                self.batch_size,
                self.covered()
            )));
        }
        Ok((0..self.batches)
            .map(|b| b * self.batch_size..(b + 1) * self.batch_size)
            .collect())
    }

    /// Batches built from a seeded permutation of the draws, for sensitivity checks.
    pub fn shuffled_indices(&self, total: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        self.ranges(total)?;
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut StreamRng::seed_from_u64(seed));
        Ok(idx
            .chunks(self.batch_size)
            .take(self.batches)
            .map(|c| c.to_vec())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approach {
    Joint,
    Marginal,
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Joint => "joint",
            Approach::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Plain(Approach),
    Rm(Approach),
    Bh(Approach),
    Bg(Approach),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Plain(a) => write!(f, "{a}"),
            Method::Rm(a) => write!(f, "rm_{a}"),
            Method::Bh(a) => write!(f, "bh_{a}"),
            Method::Bg(a) => write!(f, "bg_{a}"),
        }
    }
}

/// A point estimate on the log scale with its batch-means MCE.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// Natural log of `|estimate|`; `-inf` for an exact zero.
    pub log_estimate: f64,
    /// Set when the estimate itself is negative.
    pub negative: bool,
    /// Standard deviation of the batch log estimates; `None` when undefined
    /// (fewer than two batches, or a batch with a non-positive estimate).
    pub mce: Option<f64>,
    pub method: Method,
    pub r_used: usize,
    pub batches: usize,
}

impl EstimateReport {
    pub fn from_signed(value: LogSigned, method: Method, r_used: usize) -> Self {
        EstimateReport {
            log_estimate: value.log_abs,
            negative: value.sign < 0,
            mce: None,
            method,
            r_used,
            batches: 1,
        }
    }

    pub fn value(&self) -> f64 {
        let v = self.log_estimate.exp();
        if self.negative {
            -v
        } else {
            v
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_estimate == f64::NEG_INFINITY
    }
}

/// SplitMix64 finalizer, used to derive child seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A family of independent, reproducible random streams.
///
/// Stream `i` is ChaCha8 keyed by the master seed with stream id `i`, so
/// distinct indices never share keystream and any stream can be
/// reconstructed without touching the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStreamSet {
    pub master_seed: u64,
    pub stream_count: u64,
}

pub fn make_streams(master_seed: u64, count: u64) -> Result<RandomStreamSet> {
    if count == 0 {
        return Err(Error::input("stream count must be at least 1"));
    }
    Ok(RandomStreamSet {
        master_seed,
        stream_count: count,
    })
}

impl RandomStreamSet {
    pub fn stream(&self, index: u64) -> Result<StreamRng> {
        if index >= self.stream_count {
            return Err(Error::input(format!(
                "stream {index} out of range (count {})",
                self.stream_count
            )));
        }
        Ok(stream_rng(self.master_seed, index))
    }

    /// A fresh family whose master seed is derived from this one and `index`.
    pub fn child(&self, index: u64, count: u64) -> Result<RandomStreamSet> {
        make_streams(
            splitmix64(self.master_seed ^ splitmix64(index.wrapping_add(1))),
            count,
        )
    }
}

/// Stream `index` of the family keyed by `master_seed`.
pub fn stream_rng(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
