//! Scalar abstraction shared by the model code.
//!
//! Everything numerical in this crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. The log-space helpers live here because
//! every estimator leans on them.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Natural log of the gamma function for positive arguments.
    fn log_gamma(self) -> Self;
}

impl Scalar for f64 {
    fn log_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self)
    }
}

impl Scalar for f32 {
    fn log_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(f64::from(self)) as f32
    }
}

/// Converts an `f64` literal into `F`.
#[inline]
pub(crate) fn lit<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn from_usize<F: Scalar>(x: usize) -> F {
    F::from_usize(x).expect("count representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<F: Scalar>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// ln Beta(a, b) for positive `a`, `b`.
pub fn ln_beta<F: Scalar>(a: F, b: F) -> F {
    a.log_gamma() + b.log_gamma() - (a + b).log_gamma()
}

/// ln of the binomial coefficient `n choose k`.
pub fn ln_binomial<F: Scalar>(n: usize, k: usize) -> F {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return F::zero();
    }
    let one = F::one();
    (from_usize::<F>(n) + one).log_gamma()
        - (from_usize::<F>(k) + one).log_gamma()
        - (from_usize::<F>(n - k) + one).log_gamma()
}

/// `ln(sum(exp(x)))` without overflow. Empty input gives `-inf`.
pub fn log_sum_exp<F: Scalar, I: IntoIterator<Item = F>>(values: I) -> F {
    let values: Vec<F> = values.into_iter().collect();
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    if !max.is_finite() {
        return max;
    }
    let sum: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add_exp<F: Scalar>(a: F, b: F) -> F {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == F::neg_infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_small_integers() {
        assert!((5.0f64.log_gamma() - 24f64.ln()).abs() < 1e-13);
        assert!((5.0f32.log_gamma() - 24f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn beta_and_binomial() {
        // Beta(2, 2) = 1/6
        assert!((ln_beta(2.0f64, 2.0) - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        assert!((ln_binomial::<f64>(5, 2) - 10f64.ln()).abs() < 1e-13);
        assert_eq!(ln_binomial::<f64>(4, 0), 0.0);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0f64, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
        let w = log_add_exp(-2000.0f64, -2000.0 + 3f64.ln());
        assert!((w - (-2000.0 + 4f64.ln())).abs() < 1e-12);
    }
}
