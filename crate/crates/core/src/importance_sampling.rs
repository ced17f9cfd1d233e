//! Importance sampling from the conjugate posteriors of the observed part.
//!
//! Dropping the censoring factor `h(θ) = C(θ)^(n-r)` from the posterior
//! leaves independent gamma, gamma and beta kernels; those are the proposal.
//! Each draw is reweighted by `h`, which lies in (0, 1].

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::bayes_closed::{LossSpec, PointEstimate, Prior};
use crate::error::{Error, Result};
use crate::likelihood::{CensoredSample, SuffStats};
use crate::scalar::{from_usize, lit, log_add_exp, log_sum_exp, to_f64, Scalar};

/// Default number of proposal draws.
pub const DEFAULT_DRAWS: usize = 1000;

/// Proposal distribution. Gamma parameters are `(shape, rate)`, beta
/// parameters `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalSpec<F> {
    pub gamma1: (F, F),
    pub gamma2: (F, F),
    pub beta: (F, F),
    #[serde(rename = "M")]
    pub m: usize,
}

impl<F: Scalar> ProposalSpec<F> {
    pub fn new(stats: &SuffStats<F>, prior: Prior, m: usize) -> Result<Self> {
        let one = F::one();
        let r1 = from_usize::<F>(stats.r1);
        let r2 = from_usize::<F>(stats.r2);
        let (s1, s2) = match prior {
            Prior::Uniform => (r1 + one, r2 + one),
            Prior::Jeffreys => (r1, r2),
        };
        let spec = ProposalSpec {
            gamma1: (s1, stats.s1),
            gamma2: (s2, stats.s2),
            beta: (r1 + one, r2 + one),
            m,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("importance sample count M must be at least 1".into()));
        }
        let named = [
            ("theta1 gamma shape", self.gamma1.0),
            ("theta1 gamma rate", self.gamma1.1),
            ("theta2 gamma shape", self.gamma2.0),
            ("theta2 gamma rate", self.gamma2.1),
            ("p beta alpha", self.beta.0),
            ("p beta beta", self.beta.1),
        ];
        match named.iter().find(|(_, v)| !(*v > F::zero() && v.is_finite())) {
            Some((name, v)) => Err(Error::ImproperProposal(format!("{name} = {v} must be positive"))),
            None => Ok(()),
        }
    }
}

/// One proposal draw and its log importance weight `ln h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedDraw<F> {
    pub theta1: F,
    pub theta2: F,
    pub p: F,
    pub log_h: F,
}

impl<F: Scalar> WeightedDraw<F> {
    fn coord(&self, i: usize) -> F {
        match i {
            0 => self.theta1,
            1 => self.theta2,
            _ => self.p,
        }
    }
}

/// `(n - r) ln{p e^(-θ1 T) + (1 - p)(1 + T/δ)^(-θ2)}`.
pub fn log_censoring_weight<F: Scalar>(theta1: F, theta2: F, p: F, stats: &SuffStats<F>) -> F {
    let m = stats.censored();
    if m == 0 {
        return F::zero();
    }
    let a = p.ln() - theta1 * stats.censor_time;
    let b = (F::one() - p).ln() - theta2 * stats.censor_log_term;
    from_usize::<F>(m) * log_add_exp(a, b).min(F::zero())
}

/// `m` independent proposal draws with their log weights.
pub fn is_draws<F: Scalar, R: Rng + ?Sized>(
    sample: &CensoredSample<F>,
    delta: F,
    prior: Prior,
    m: usize,
    rng: &mut R,
) -> Result<Vec<WeightedDraw<F>>> {
    let stats = SuffStats::new(sample, delta)?;
    let spec = ProposalSpec::new(&stats, prior, m)?;
    draws_from_spec(&spec, &stats, rng)
}

pub fn draws_from_spec<F: Scalar, R: Rng + ?Sized>(
    spec: &ProposalSpec<F>,
    stats: &SuffStats<F>,
    rng: &mut R,
) -> Result<Vec<WeightedDraw<F>>> {
    spec.validate()?;
    let gamma = |(shape, rate): (F, F)| {
        Gamma::new(to_f64(shape), 1.0 / to_f64(rate))
            .map_err(|e| Error::ImproperProposal(format!("gamma({shape}, {rate}): {e}")))
    };
    let g1 = gamma(spec.gamma1)?;
    let g2 = gamma(spec.gamma2)?;
    let b = Beta::new(to_f64(spec.beta.0), to_f64(spec.beta.1))
        .map_err(|e| Error::ImproperProposal(format!("beta{:?}: {e}", spec.beta)))?;
    Ok((0..spec.m)
        .map(|_| {
            let theta1: F = lit(g1.sample(rng));
            let theta2: F = lit(g2.sample(rng));
            let p: F = lit(b.sample(rng));
            WeightedDraw {
                theta1,
                theta2,
                p,
                log_h: log_censoring_weight(theta1, theta2, p, stats),
            }
        })
        .collect())
}

/// Maps the weighted mean of `g` to `(estimate, d estimate / d mean)`.
type BackMap<F> = Box<dyn Fn(F) -> (F, F)>;

/// Self-normalized importance estimate with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsEstimate<F> {
    pub estimate: PointEstimate<F>,
    /// Delta-method Monte-Carlo standard errors of `estimate`.
    pub std_error: PointEstimate<F>,
    /// `(Σw)² / Σw²`
    pub ess: F,
    /// `Σw / max w`
    pub weight_ratio: F,
    pub draws: usize,
}

/// Self-normalized estimate of the Bayes estimator under `loss`.
pub fn is_estimate<F: Scalar>(draws: &[WeightedDraw<F>], loss: &LossSpec<F>) -> Result<IsEstimate<F>> {
    loss.validate()?;
    let finite: Vec<&WeightedDraw<F>> = draws.iter().filter(|d| d.log_h.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::DegenerateWeights { ratio: 0.0 });
    }
    let max = finite.iter().map(|d| d.log_h).fold(F::neg_infinity(), F::max);
    let w: Vec<F> = finite.iter().map(|d| (d.log_h - max).exp()).collect();
    let sum_w: F = w.iter().copied().sum();
    let sum_w2: F = w.iter().map(|&x| x * x).sum();
    // the largest weight is exactly 1 after the shift
    let ratio = sum_w;
    let threshold = lit::<F>(2.0).min(from_usize(finite.len()));
    if !(ratio >= threshold) {
        return Err(Error::DegenerateWeights { ratio: to_f64(ratio) });
    }
    let mut est = [F::zero(); 3];
    let mut se = [F::zero(); 3];
    for i in 0..3 {
        let (g, back): (Vec<F>, BackMap<F>) = match *loss {
            LossSpec::Squared => (
                finite.iter().map(|d| d.coord(i)).collect(),
                Box::new(|m: F| (m, F::one())),
            ),
            LossSpec::GeneralEntropy { c } => (
                finite.iter().map(|d| d.coord(i).powf(-c)).collect(),
                Box::new(move |m: F| {
                    let e = m.powf(-F::one() / c);
                    // d/dm of m^(-1/c)
                    (e, (e / (c * m)).abs())
                }),
            ),
        };
        let mean = g.iter().zip(&w).map(|(&gi, &wi)| gi * wi).sum::<F>() / sum_w;
        let var_num: F = g.iter().zip(&w).map(|(&gi, &wi)| wi * wi * (gi - mean) * (gi - mean)).sum();
        let (value, slope) = back(mean);
        est[i] = value;
        se[i] = slope * var_num.sqrt() / sum_w;
    }
    Ok(IsEstimate {
        estimate: PointEstimate::from_array(est),
        std_error: PointEstimate::from_array(se),
        ess: sum_w * sum_w / sum_w2,
        weight_ratio: ratio,
        draws: finite.len(),
    })
}

/// Log of the mean importance weight, an estimate of `ln E_q[h]`.
pub fn log_mean_weight<F: Scalar>(draws: &[WeightedDraw<F>]) -> F {
    log_sum_exp(draws.iter().map(|d| d.log_h)) - from_usize::<F>(draws.len()).ln()
}
