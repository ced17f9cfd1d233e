//! Posterior predictive distribution of one future lifetime.
//!
//! Integrating the mixture density against each expansion term splits the
//! predictive density into an exponential-origin branch and a Lomax-origin
//! branch:
//!
//! ```text
//! Γ(a1+1) Γ(a2) (A_k + y)^-(a1+1) B_k^-a2 Beta(k+r1+2, n-k-r1+1)
//! Γ(a1) Γ(a2+1) A_k^-a1 (B_k + u)^-(a2+1) Beta(k+r1+1, n-k-r1+2) / (y + δ)
//! ```
//!
//! with `u = ln(1 + y/δ)` and `(a1, a2)` the posterior gamma shapes. Both
//! branches integrate in closed form, so the CDF and survival function need
//! no quadrature.

use serde::{Deserialize, Serialize};

use crate::bayes_closed::{PosteriorExpansion, Prior};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, ln_beta, log_sum_exp, to_f64, Scalar};

/// Equal-tail predictive interval and the predictive median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary<F> {
    pub median: F,
    pub lower: F,
    pub upper: F,
    pub alpha: F,
    pub prior: Prior,
}

impl<F: Scalar> PredictiveSummary<F> {
    pub fn width(&self) -> F {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy)]
struct Term<F> {
    a: F,
    b: F,
    /// ln of the exponential branch mass, normalized by H
    log_exp_mass: F,
    /// ln of the Lomax branch mass, normalized by H
    log_lomax_mass: F,
}

/// Predictive distribution of a posterior expansion, with the per-term
/// constants precomputed.
#[derive(Debug, Clone)]
pub struct Predictive<F> {
    terms: Vec<Term<F>>,
    a1: F,
    a2: F,
    delta: F,
    prior: Prior,
}

impl<F: Scalar> Predictive<F> {
    pub fn new(expansion: &PosteriorExpansion<F>) -> Result<Self> {
        let (a1, a2) = expansion.shapes();
        if !(a1 > F::zero() && a2 > F::zero()) {
            return Err(Error::ImproperPosterior(format!(
                "predictive distribution needs positive gamma shapes, got ({a1}, {a2})"
            )));
        }
        let one = F::one();
        let two = one + one;
        let stats = &expansion.stats;
        let r1 = from_usize::<F>(stats.r1);
        let n = from_usize::<F>(stats.n);
        let log_gammas = a1.log_gamma() + a2.log_gamma();
        let terms = expansion
            .terms
            .iter()
            .map(|t| {
                let k = from_usize::<F>(t.k);
                let base = t.log_binom + log_gammas - a1 * t.a.ln() - a2 * t.b.ln() - expansion.log_h;
                Term {
                    a: t.a,
                    b: t.b,
                    log_exp_mass: base + ln_beta(k + r1 + two, n - k - r1 + one),
                    log_lomax_mass: base + ln_beta(k + r1 + one, n - k - r1 + two),
                }
            })
            .collect();
        Ok(Predictive {
            terms,
            a1,
            a2,
            delta: stats.delta,
            prior: expansion.prior,
        })
    }

    fn check_y(y: F) -> Result<()> {
        if y >= F::zero() {
            Ok(())
        } else {
            Err(Error::domain("y", to_f64(y), "must be nonnegative"))
        }
    }

    pub fn pdf(&self, y: F) -> Result<F> {
        Self::check_y(y)?;
        if y.is_infinite() {
            return Ok(F::zero());
        }
        let one = F::one();
        let u = (y / self.delta).ln_1p();
        let ln_y_delta = (y + self.delta).ln();
        // mass * a1 / A * (1 + y/A)^-(a1+1), and the Lomax analogue
        let logs = self.terms.iter().flat_map(|t| {
            [
                t.log_exp_mass + self.a1.ln() - t.a.ln() - (self.a1 + one) * (y / t.a).ln_1p(),
                t.log_lomax_mass + self.a2.ln() - t.b.ln() - (self.a2 + one) * (u / t.b).ln_1p() - ln_y_delta,
            ]
        });
        Ok(log_sum_exp(logs).exp())
    }

    /// `P(Y <= y)`, summed from the small branch-wise masses below `y`.
    pub fn cdf(&self, y: F) -> Result<F> {
        Self::check_y(y)?;
        if y.is_infinite() {
            return Ok(F::one());
        }
        let u = (y / self.delta).ln_1p();
        let sum: F = self
            .terms
            .iter()
            .map(|t| {
                t.log_exp_mass.exp() * -(-self.a1 * (y / t.a).ln_1p()).exp_m1()
                    + t.log_lomax_mass.exp() * -(-self.a2 * (u / t.b).ln_1p()).exp_m1()
            })
            .sum();
        Ok(sum.min(F::one()))
    }

    /// `P(Y > y)`, summed from the branch-wise tail masses so it keeps
    /// relative accuracy far into the tail.
    pub fn survival(&self, y: F) -> Result<F> {
        Self::check_y(y)?;
        if y.is_infinite() {
            return Ok(F::zero());
        }
        let u = (y / self.delta).ln_1p();
        let logs = self.terms.iter().flat_map(|t| {
            [
                t.log_exp_mass - self.a1 * (y / t.a).ln_1p(),
                t.log_lomax_mass - self.a2 * (u / t.b).ln_1p(),
            ]
        });
        Ok(log_sum_exp(logs).exp().min(F::one()))
    }

    /// Solves `cdf(y) = prob` by bisection on a bracket grown by doubling
    /// from `[0, 1]`. Upper-half targets are solved on the survival function.
    pub fn quantile(&self, prob: F) -> Result<F> {
        let one = F::one();
        if !(prob > F::zero() && prob < one) {
            return Err(Error::domain("probability", to_f64(prob), "must lie in (0, 1)"));
        }
        let half = lit::<F>(0.5);
        let upper_half = prob > half;
        let tail = one - prob;
        // g is increasing in y and vanishes at the root
        let g = |y: F| -> Result<F> {
            if upper_half {
                Ok(tail - self.survival(y)?)
            } else {
                Ok(self.cdf(y)? - prob)
            }
        };
        let two = one + one;
        let mut lo = F::zero();
        let mut hi = one;
        let mut g_hi = g(hi)?;
        while g_hi < F::zero() {
            lo = hi;
            hi = hi * two;
            if !hi.is_finite() {
                return Err(Error::BracketFailure {
                    target: to_f64(prob),
                    upper: to_f64(lo),
                    reached: to_f64(prob + g(lo)?),
                });
            }
            g_hi = g(hi)?;
        }
        let tol = lit::<F>(1e-10).max(lit::<F>(16.0) * F::epsilon()) * lit(1e-2);
        let four = two + two;
        for _ in 0..4000 {
            // geometric steps while the bracket spans orders of magnitude
            let mid = if lo > F::zero() && hi > four * lo {
                (lo * hi).sqrt()
            } else {
                lo + (hi - lo) / two
            };
            if !(mid > lo && mid < hi) {
                break;
            }
            let gm = g(mid)?;
            if gm.abs() <= tol {
                return Ok(mid);
            }
            if gm < F::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (g_lo, g_hi) = (g(lo)?, g(hi)?);
        Ok(if g_lo.abs() < g_hi.abs() && lo > F::zero() { lo } else { hi })
    }

    pub fn interval(&self, alpha: F) -> Result<PredictiveSummary<F>> {
        let one = F::one();
        if !(alpha > F::zero() && alpha < one) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let half_alpha = alpha / (one + one);
        Ok(PredictiveSummary {
            median: self.quantile(lit(0.5))?,
            lower: self.quantile(half_alpha)?,
            upper: self.quantile(one - half_alpha)?,
            alpha,
            prior: self.prior,
        })
    }
}

pub fn predictive_pdf<F: Scalar>(y: F, expansion: &PosteriorExpansion<F>) -> Result<F> {
    Predictive::new(expansion)?.pdf(y)
}

pub fn predictive_cdf<F: Scalar>(y: F, expansion: &PosteriorExpansion<F>) -> Result<F> {
    Predictive::new(expansion)?.cdf(y)
}

pub fn predictive_survival<F: Scalar>(y: F, expansion: &PosteriorExpansion<F>) -> Result<F> {
    Predictive::new(expansion)?.survival(y)
}

/// Median and equal-tail `100(1 - alpha)%` predictive bounds.
pub fn predictive_interval<F: Scalar>(expansion: &PosteriorExpansion<F>, alpha: F) -> Result<PredictiveSummary<F>> {
    Predictive::new(expansion)?.interval(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::CensoredSample;

    /// One failure per component, nothing censored, A = B = 1.
    fn canonical(prior: Prior) -> PosteriorExpansion<f64> {
        let x2 = std::f64::consts::E - 1.0;
        let s = CensoredSample::new(vec![1.0], vec![x2], 2, 2.0).unwrap();
        PosteriorExpansion::new(&s, 1.0, prior).unwrap()
    }

    #[test]
    fn canonical_density_at_zero() {
        let v = predictive_pdf(0.0, &canonical(Prior::Uniform)).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_density_decreases() {
        let p = Predictive::new(&canonical(Prior::Uniform)).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..2000 {
            let v = p.pdf(i as f64 * 0.01).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn endpoints() {
        for prior in [Prior::Uniform, Prior::Jeffreys] {
            let p = Predictive::new(&canonical(prior)).unwrap();
            assert_eq!(p.cdf(0.0).unwrap(), 0.0);
            assert_eq!(p.cdf(f64::INFINITY).unwrap(), 1.0);
            assert!((p.survival(0.0).unwrap() - 1.0).abs() < 1e-14);
            assert!(p.cdf(-1.0).is_err());
        }
    }

    #[test]
    fn cdf_and_survival_agree() {
        let s = CensoredSample::new(vec![0.1, 0.25, 0.05], vec![0.3, 0.02], 9, 0.4).unwrap();
        for prior in [Prior::Uniform, Prior::Jeffreys] {
            let p = Predictive::new(&PosteriorExpansion::new(&s, 1.0, prior).unwrap()).unwrap();
            for y in [1e-6f64, 1e-3, 0.1, 1.0, 10.0, 1e3] {
                let sum = p.cdf(y).unwrap() + p.survival(y).unwrap();
                assert!((sum - 1.0).abs() < 1e-13, "{y}: {sum}");
            }
        }
    }

    #[test]
    fn canonical_quartiles() {
        let p = Predictive::new(&canonical(Prior::Uniform)).unwrap();
        let iv = p.interval(0.5).unwrap();
        assert!(iv.lower < iv.median && iv.median < iv.upper);
        assert!((p.cdf(iv.lower).unwrap() - 0.25).abs() < 1e-10);
        assert!((p.cdf(iv.median).unwrap() - 0.5).abs() < 1e-10);
        assert!((p.cdf(iv.upper).unwrap() - 0.75).abs() < 1e-10);
    }

    #[test]
    fn alpha_is_validated() {
        let p = Predictive::new(&canonical(Prior::Uniform)).unwrap();
        assert!(matches!(p.interval(1.5), Err(Error::InvalidConfig(_))));
        assert!(matches!(p.interval(0.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn far_tail_quantile() {
        // a single Lomax failure under Jeffreys leaves a (ln y)^-1 tail
        let p = Predictive::new(&canonical(Prior::Jeffreys)).unwrap();
        let y = p.quantile(0.99).unwrap();
        assert!((p.survival(y).unwrap() - 0.01).abs() < 1e-11);
    }
}
