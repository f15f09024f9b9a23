//! Scalar primitives: the Gaussian tail and its inverse, log-domain
//! probabilities, Gaussian-weighted quadrature and seeded sampling.

mod quadrature;
mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub use quadrature::{integrate_gaussian_weighted, integrate_gaussian_weighted_tol, Tolerance};
pub use rng::{gaussian_samples, RngSeed, StreamRng};

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability<T = f64> {
    value: T,
}

impl<T: Scalar> Probability<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value <= T::one() {
            Ok(Probability { value })
        } else {
            Err(Error::domain("Probability::new", format!("{value} not in [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 1 (the uninformative error value).
    pub fn clamped(value: T) -> Self {
        let value = if value.is_nan() {
            T::one()
        } else {
            value.max(T::zero()).min(T::one())
        };
        Probability { value }
    }

    pub fn zero() -> Self {
        Probability { value: T::zero() }
    }

    pub fn one() -> Self {
        Probability { value: T::one() }
    }

    #[inline]
    pub fn value(self) -> T {
        self.value
    }

    pub fn complement(self) -> Self {
        Probability {
            value: T::one() - self.value,
        }
    }

    pub fn ln(self) -> LogProbability<T> {
        LogProbability {
            log_value: self.value.ln(),
        }
    }
}

/// Natural logarithm of a probability; keeps `exp[-E(...)]` bounds from
/// underflowing before they are combined.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProbability<T = f64> {
    log_value: T,
}

impl<T: Scalar> LogProbability<T> {
    pub fn new(log_value: T) -> Result<Self> {
        if log_value <= T::zero() {
            Ok(LogProbability { log_value })
        } else {
            Err(Error::domain(
                "LogProbability::new",
                format!("log-probability {log_value} is positive"),
            ))
        }
    }

    /// Clamps positive values to `0` (probability one).
    pub fn clamped(log_value: T) -> Self {
        LogProbability {
            log_value: if log_value.is_nan() {
                T::zero()
            } else {
                log_value.min(T::zero())
            },
        }
    }

    #[inline]
    pub fn log_value(self) -> T {
        self.log_value
    }

    pub fn to_probability(self) -> Probability<T> {
        Probability::clamped(self.log_value.exp())
    }

    /// `ln(exp(a) + exp(b))`, saturating at probability one.
    pub fn logsum(self, other: Self) -> Self {
        Self::clamped(logsumexp(self.log_value, other.log_value))
    }

    /// Product of probabilities.
    pub fn mul(self, other: Self) -> Self {
        LogProbability {
            log_value: self.log_value + other.log_value,
        }
    }
}

/// `ln(exp(a) + exp(b))` without overflow or underflow.
pub fn logsumexp<T: Scalar>(a: T, b: T) -> T {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == T::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn check_finite<T: Scalar>(op: &'static str, x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("non-finite argument {x}")))
    }
}

/// Standard Gaussian tail `Pr[N(0,1) > x]`.
///
/// Evaluated as `erfc(x / sqrt 2) / 2`, which has no cancellation for large
/// positive `x`; for negative `x` the value is close to one and is computed
/// from the same expression (erfc is accurate on the whole line).
pub fn q_tail<T: Scalar>(x: T) -> Result<Probability<T>> {
    check_finite("q_tail", x)?;
    Ok(Probability::clamped(q_unchecked(x)))
}

#[inline]
pub(crate) fn q_unchecked<T: Scalar>(x: T) -> T {
    lit::<T>(0.5) * (x * T::FRAC_1_SQRT_2()).erfc()
}

/// `ln Q(x)`, finite for every finite `x` (no underflow in the far tail).
pub fn ln_q_tail<T: Scalar>(x: T) -> Result<T> {
    check_finite("ln_q_tail", x)?;
    Ok(ln_q_unchecked(x))
}

pub(crate) fn ln_q_unchecked<T: Scalar>(x: T) -> T {
    if x < lit(30.0) {
        return q_unchecked(x).ln();
    }
    // Asymptotic expansion Q(x) = φ(x)/x · (1 − 1/x² + 3/x⁴ − 15/x⁶ + 105/x⁸);
    // the first omitted term is below 1e-14 relative for x ≥ 30.
    let inv2 = (x * x).recip();
    let series = T::one() - inv2 * (T::one() - inv2 * (lit::<T>(3.0) - inv2 * (lit::<T>(15.0) - inv2 * lit(105.0))));
    -(x * x) * lit(0.5) - (x * lit::<T>(2.506_628_274_631_000_5)).ln() + series.ln()
}

/// Standard Gaussian density.
#[inline]
pub(crate) fn std_normal_pdf<T: Scalar>(x: T) -> T {
    (-(x * x) * lit(0.5)).exp() * lit(0.398_942_280_401_432_7)
}

/// Inverse of [`q_tail`] by bisection on a `[-40, 40]` bracket down to a
/// width of `1e-12` (or the scalar's resolution).
pub fn q_inverse<T: Scalar>(p: Probability<T>) -> Result<T> {
    let p = p.value();
    if p <= T::zero() || p >= T::one() {
        return Err(Error::domain(
            "q_inverse",
            format!("p = {p} has an infinite inverse"),
        ));
    }
    let width = lit::<T>(1e-12);
    let mut lo = lit::<T>(-40.0);
    let mut hi = lit::<T>(40.0);
    // q_unchecked(lo) > p > q_unchecked(hi)
    loop {
        let mid = (lo + hi) * lit(0.5);
        if hi - lo <= width || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if q_unchecked(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
