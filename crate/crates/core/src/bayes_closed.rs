//! Closed-form posterior summaries under the uniform and Jeffreys priors.
//!
//! Crediting `k` of the `n - r` censored units to the exponential component
//! turns the likelihood into a finite sum of gamma x gamma x beta kernels.
//! Every posterior moment is then a ratio of two such sums:
//!
//! ```text
//! E[θ1^a θ2^b p^j] = Σ_k C(m,k) Γ(s1+a) A_k^-(s1+a) Γ(s2+b) B_k^-(s2+b) Beta(k+r1+1+j, n-k-r1+1)
//!                    ------------------------------------------------------------------------
//!                                               H
//! ```
//!
//! with `A_k = S1 + kT`, `B_k = S2 + (m-k) ln(1+T/δ)`, `m = n - r`, and the
//! gamma shapes `s1 = r1 + 1`, `s2 = r2 + 1` (uniform) or `s1 = r1`,
//! `s2 = r2` (Jeffreys). `H` is the same sum with `a = b = j = 0`. All sums
//! are carried in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{CensoredSample, SuffStats};
use crate::scalar::{from_usize, ln_beta, ln_binomial, log_sum_exp, to_f64, Scalar};

/// Noninformative prior on `(theta1, theta2)`; `p` is uniform on (0, 1)
/// under both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    /// Flat on `theta1, theta2 > 0`.
    Uniform,
    /// `1 / (theta1 theta2)`.
    Jeffreys,
}

impl Prior {
    pub fn name(self) -> &'static str {
        match self {
            Prior::Uniform => "uniform",
            Prior::Jeffreys => "jeffreys",
        }
    }
}

/// Loss function that defines a Bayes estimator (and a risk).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossSpec<F> {
    /// Squared error `(est - θ)^2`.
    #[serde(rename = "self")]
    Squared,
    /// General entropy `(est/θ)^c - c ln(est/θ) - 1`, with weight fixed at 1.
    #[serde(rename = "gelf")]
    GeneralEntropy { c: F },
}

impl<F: Scalar> LossSpec<F> {
    pub fn gelf(c: F) -> Result<Self> {
        let loss = LossSpec::GeneralEntropy { c };
        loss.validate()?;
        Ok(loss)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::GeneralEntropy { c } if c == F::zero() || !c.is_finite() => Err(Error::InvalidLoss(format!(
                "general entropy loss needs a finite nonzero c, got {c}"
            ))),
            _ => Ok(()),
        }
    }

    /// Loss of estimating `truth` by `estimate`.
    pub fn evaluate(&self, truth: F, estimate: F) -> Result<F> {
        self.validate()?;
        match *self {
            LossSpec::Squared => Ok((estimate - truth) * (estimate - truth)),
            LossSpec::GeneralEntropy { c } => {
                if !(truth > F::zero() && estimate > F::zero()) {
                    return Err(Error::domain(
                        "estimate",
                        to_f64(estimate),
                        "general entropy loss needs positive truth and estimate",
                    ));
                }
                let ln_ratio = (estimate / truth).ln();
                // x^c - c ln x - 1 = expm1(c ln x) - c ln x, exact near x = 1
                Ok(((c * ln_ratio).exp_m1() - c * ln_ratio).max(F::zero()))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            LossSpec::Squared => "SELF".to_string(),
            LossSpec::GeneralEntropy { c } => format!("GELF(c={c})"),
        }
    }
}

/// Estimates of `(theta1, theta2, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate<F> {
    pub theta1: F,
    pub theta2: F,
    pub p: F,
}

impl<F: Copy> PointEstimate<F> {
    pub fn from_array(v: [F; 3]) -> Self {
        PointEstimate {
            theta1: v[0],
            theta2: v[1],
            p: v[2],
        }
    }

    pub fn to_array(&self) -> [F; 3] {
        [self.theta1, self.theta2, self.p]
    }
}

/// One `k` term of the binomial expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm<F> {
    pub k: usize,
    /// `S1 + T k`
    pub a: F,
    /// `S2 + (n - r - k) ln(1 + T/delta)`
    pub b: F,
    pub log_binom: F,
}

/// Posterior under one prior, ready for any closed-form functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorExpansion<F> {
    pub terms: Vec<ExpansionTerm<F>>,
    /// ln H, the log normalizing constant.
    pub log_h: F,
    pub prior: Prior,
    pub stats: SuffStats<F>,
}

/// Exponents of one posterior functional: `θ1^a θ2^b p^j (1-p)^i` and the
/// shape shift inside the `Beta` factor.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Moment<F> {
    pub theta1: F,
    pub theta2: F,
    pub p: F,
    pub q: F,
}

impl<F: Scalar> Moment<F> {
    pub fn zero() -> Self {
        Moment {
            theta1: F::zero(),
            theta2: F::zero(),
            p: F::zero(),
            q: F::zero(),
        }
    }
}

impl<F: Scalar> PosteriorExpansion<F> {
    pub fn new(sample: &CensoredSample<F>, delta: F, prior: Prior) -> Result<Self> {
        Self::from_stats(SuffStats::new(sample, delta)?, prior)
    }

    pub fn from_stats(stats: SuffStats<F>, prior: Prior) -> Result<Self> {
        if prior == Prior::Jeffreys && (stats.r1 == 0 || stats.r2 == 0) {
            return Err(Error::ImproperPosterior(format!(
                "Jeffreys prior needs at least one failure per component (r1 = {}, r2 = {}): Gamma(0) diverges",
                stats.r1, stats.r2
            )));
        }
        let m = stats.censored();
        let terms: Vec<ExpansionTerm<F>> = (0..=m)
            .map(|k| ExpansionTerm {
                k,
                a: stats.s1 + stats.censor_time * from_usize::<F>(k),
                b: stats.s2 + from_usize::<F>(m - k) * stats.censor_log_term,
                log_binom: ln_binomial(m, k),
            })
            .collect();
        // every term carries a strictly positive power of 1/A_k and 1/B_k
        if let Some(t) = terms.iter().find(|t| !(t.a > F::zero()) || !(t.b > F::zero())) {
            return Err(Error::ImproperPosterior(format!(
                "expansion term k = {} has A = {}, B = {}: the posterior integral diverges \
                 (r1 = {}, r2 = {}, {} censored)",
                t.k, t.a, t.b, stats.r1, stats.r2, m
            )));
        }
        let mut expansion = PosteriorExpansion {
            terms,
            log_h: F::zero(),
            prior,
            stats,
        };
        let log_h = expansion.log_functional(Moment::zero())?;
        if !log_h.is_finite() {
            return Err(Error::ImproperPosterior(format!("normalizing constant ln H = {log_h} is not finite")));
        }
        expansion.log_h = log_h;
        Ok(expansion)
    }

    /// Gamma shapes of the `theta1` and `theta2` kernels.
    pub fn shapes(&self) -> (F, F) {
        let r1 = from_usize::<F>(self.stats.r1);
        let r2 = from_usize::<F>(self.stats.r2);
        match self.prior {
            Prior::Uniform => (r1 + F::one(), r2 + F::one()),
            Prior::Jeffreys => (r1, r2),
        }
    }

    /// ln of the unnormalized posterior integral of `θ1^a θ2^b p^j (1-p)^i`.
    /// Requires every gamma and beta argument to be positive; the caller
    /// maps violations to the right error.
    pub(crate) fn log_functional(&self, m: Moment<F>) -> Result<F> {
        let (s1, s2) = self.shapes();
        let one = F::one();
        let shape1 = s1 + m.theta1;
        let shape2 = s2 + m.theta2;
        let r1 = from_usize::<F>(self.stats.r1);
        let n = from_usize::<F>(self.stats.n);
        if !(shape1 > F::zero() && shape2 > F::zero() && r1 + one + m.p > F::zero()) {
            return Err(Error::ImproperPosterior(format!(
                "posterior functional has nonpositive gamma or beta argument (shapes {shape1}, {shape2})"
            )));
        }
        let log_gammas = shape1.log_gamma() + shape2.log_gamma();
        let sum = log_sum_exp(self.terms.iter().map(|t| {
            let kf = from_usize::<F>(t.k);
            t.log_binom - shape1 * t.a.ln() - shape2 * t.b.ln()
                + ln_beta(kf + r1 + one + m.p, n - kf - r1 + one + m.q)
        }));
        Ok(log_gammas + sum)
    }

    /// Posterior expectation of `θ1^a θ2^b p^j (1-p)^i`.
    pub(crate) fn expectation(&self, m: Moment<F>) -> Result<F> {
        Ok((self.log_functional(m)? - self.log_h).exp())
    }

    pub(crate) fn r1(&self) -> usize {
        self.stats.r1
    }
}

/// Builds the expansion for `sample` under `prior`, checking propriety.
pub fn build_expansion<F: Scalar>(sample: &CensoredSample<F>, delta: F, prior: Prior) -> Result<PosteriorExpansion<F>> {
    PosteriorExpansion::new(sample, delta, prior)
}

fn moment<F: Scalar>(coord: usize, power: F) -> Moment<F> {
    let mut m = Moment::zero();
    match coord {
        0 => m.theta1 = power,
        1 => m.theta2 = power,
        _ => m.p = power,
    }
    m
}

/// Posterior means: the Bayes estimator under squared error loss.
pub fn bayes_self<F: Scalar>(expansion: &PosteriorExpansion<F>) -> Result<PointEstimate<F>> {
    let one = F::one();
    Ok(PointEstimate {
        theta1: expansion.expectation(moment(0, one))?,
        theta2: expansion.expectation(moment(1, one))?,
        p: expansion.expectation(moment(2, one))?,
    })
}

/// Bayes estimator under general entropy loss, `{E(θ^-c)}^(-1/c)`, for each
/// coordinate.
pub fn bayes_gelf<F: Scalar>(expansion: &PosteriorExpansion<F>, c: F) -> Result<PointEstimate<F>> {
    LossSpec::gelf(c)?;
    let one = F::one();
    let (s1, s2) = expansion.shapes();
    let r1 = from_usize::<F>(expansion.r1());
    let checks = [
        ("theta1", s1 - c, "gamma shape of theta1 minus c"),
        ("theta2", s2 - c, "gamma shape of theta2 minus c"),
        ("p", r1 + one - c, "r1 + 1 - c"),
    ];
    if let Some((name, value, what)) = checks.iter().find(|(_, v, _)| !(*v > F::zero())) {
        return Err(Error::GelfDomain(format!(
            "{what} = {value} must be positive for the {name} estimator (c = {c}, {} prior)",
            expansion.prior.name()
        )));
    }
    let est = |coord| -> Result<F> {
        let e = expansion.expectation(moment(coord, -c))?;
        Ok(e.powf(-one / c))
    };
    Ok(PointEstimate {
        theta1: est(0)?,
        theta2: est(1)?,
        p: est(2)?,
    })
}

/// Posterior variances `E(θ²) - E(θ)²` per coordinate.
pub fn posterior_variance<F: Scalar>(expansion: &PosteriorExpansion<F>) -> Result<PointEstimate<F>> {
    let one = F::one();
    let two = one + one;
    let var = |coord| -> Result<F> {
        let m1 = expansion.expectation(moment(coord, one))?;
        let m2 = expansion.expectation(moment(coord, two))?;
        Ok((m2 - m1 * m1).max(F::zero()))
    };
    Ok(PointEstimate {
        theta1: var(0)?,
        theta2: var(1)?,
        p: var(2)?,
    })
}
