//! Log-domain arithmetic: log-sum-exp and a sign-tracked logarithm for
//! products and averages of quantities that may be negative or that would
//! overflow in linear space.

use std::cmp::Ordering;
use std::ops::{Div, Mul};

/// `log(Σ exp(xᵢ))`; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// `log((1/n) Σ exp(xᵢ))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NEG_INFINITY;
    }
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Numerically stable `log(1 + exp(x))`.
#[inline]
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// A real number stored as `sign · exp(log_abs)`.
///
/// Zero is `sign == 0` with `log_abs == -inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSigned {
    pub log_abs: f64,
    pub sign: i8,
}

impl LogSigned {
    pub const ZERO: LogSigned = LogSigned {
        log_abs: f64::NEG_INFINITY,
        sign: 0,
    };
    pub const ONE: LogSigned = LogSigned {
        log_abs: 0.0,
        sign: 1,
    };

    pub fn from_f64(x: f64) -> Self {
        match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => LogSigned {
                log_abs: x.ln(),
                sign: 1,
            },
            Some(Ordering::Less) => LogSigned {
                log_abs: (-x).ln(),
                sign: -1,
            },
            _ => LogSigned::ZERO,
        }
    }

    /// A positive number given by its logarithm.
    pub fn from_log(log_abs: f64) -> Self {
        if log_abs == f64::NEG_INFINITY {
            LogSigned::ZERO
        } else {
            LogSigned { log_abs, sign: 1 }
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_abs.exp(),
        }
    }

    /// Signed sum of many terms with a single max-shift.
    pub fn sum(terms: &[LogSigned]) -> LogSigned {
        let max = terms
            .iter()
            .filter(|t| t.sign != 0)
            .map(|t| t.log_abs)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return LogSigned::ZERO;
        }
        // Positive and negative parts are accumulated separately and
        // subtracted once.
        let (mut pos, mut neg) = (0.0, 0.0);
        for t in terms {
            match t.sign {
                1 => pos += (t.log_abs - max).exp(),
                -1 => neg += (t.log_abs - max).exp(),
                _ => {}
            }
        }
        let diff = pos - neg;
        if diff == 0.0 {
            LogSigned::ZERO
        } else {
            LogSigned {
                log_abs: max + diff.abs().ln(),
                sign: if diff > 0.0 { 1 } else { -1 },
            }
        }
    }

    /// Signed mean `(1/n) Σ terms`.
    pub fn mean(terms: &[LogSigned]) -> LogSigned {
        if terms.is_empty() {
            return LogSigned::ZERO;
        }
        let s = Self::sum(terms);
        if s.is_zero() {
            s
        } else {
            LogSigned {
                log_abs: s.log_abs - (terms.len() as f64).ln(),
                sign: s.sign,
            }
        }
    }

    /// `self - other`, evaluated in log space.
    pub fn sub(self, other: LogSigned) -> LogSigned {
        Self::sum(&[
            self,
            LogSigned {
                log_abs: other.log_abs,
                sign: -other.sign,
            },
        ])
    }
}

impl Mul for LogSigned {
    type Output = LogSigned;
    fn mul(self, rhs: LogSigned) -> LogSigned {
        if self.sign == 0 || rhs.sign == 0 {
            LogSigned::ZERO
        } else {
            LogSigned {
                log_abs: self.log_abs + rhs.log_abs,
                sign: self.sign * rhs.sign,
            }
        }
    }
}

impl Div for LogSigned {
    type Output = LogSigned;
    /// Division by zero yields a value with `log_abs == +inf`.
    fn div(self, rhs: LogSigned) -> LogSigned {
        if self.sign == 0 {
            return LogSigned::ZERO;
        }
        let sign = if rhs.sign == 0 { self.sign } else { self.sign * rhs.sign };
        LogSigned {
            log_abs: self.log_abs - rhs.log_abs,
            sign,
        }
    }
}
