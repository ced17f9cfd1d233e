//! Type-I censored likelihood, its derivatives and maximum likelihood fitting.
//!
//! The log-likelihood is reported up to the additive constant of the
//! proportionality factor, so only differences are meaningful.

use serde::{Deserialize, Serialize};

use crate::distributions::{Component, LabeledLifetime, Params};
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, ln_binomial, log_add_exp, log_sum_exp, to_f64, Scalar};

/// Observed failures per component plus the censoring design.
///
/// Units still running at `censor_time` have no rows; only their number
/// `n - r1 - r2` enters the likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample<F> {
    pub obs1: Vec<F>,
    pub obs2: Vec<F>,
    pub n: usize,
    pub censor_time: F,
}

impl<F: Scalar> CensoredSample<F> {
    pub fn new(obs1: Vec<F>, obs2: Vec<F>, n: usize, censor_time: F) -> Result<Self> {
        let sample = CensoredSample {
            obs1,
            obs2,
            n,
            censor_time,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.censor_time > F::zero()) {
            return Err(Error::InvalidSample(format!(
                "censor time must be positive, got {}",
                self.censor_time
            )));
        }
        if self.r() > self.n {
            return Err(Error::InvalidSample(format!(
                "{} observed failures exceed n = {}",
                self.r(),
                self.n
            )));
        }
        for (label, obs) in [(1, &self.obs1), (2, &self.obs2)] {
            if let Some(t) = obs
                .iter()
                .find(|&&t| !(t > F::zero() && t <= self.censor_time))
            {
                return Err(Error::InvalidSample(format!(
                    "component {label} failure time {t} outside (0, {}]",
                    self.censor_time
                )));
            }
        }
        Ok(())
    }

    /// Applies type-I censoring at `censor_time` to fully observed labeled
    /// lifetimes. Labels of censored units are discarded.
    pub fn censor(draws: &[LabeledLifetime<F>], censor_time: F) -> Result<Self> {
        let mut obs1 = Vec::new();
        let mut obs2 = Vec::new();
        for d in draws.iter().filter(|d| d.time <= censor_time) {
            match d.component {
                Component::Exponential => obs1.push(d.time),
                Component::Lomax => obs2.push(d.time),
            }
        }
        // a zero lifetime can only come from a uniform draw of exactly 0
        let floor = F::min_positive_value();
        obs1.iter_mut().chain(obs2.iter_mut()).for_each(|t| *t = t.max(floor));
        Self::new(obs1, obs2, draws.len(), censor_time)
    }

    pub fn r1(&self) -> usize {
        self.obs1.len()
    }

    pub fn r2(&self) -> usize {
        self.obs2.len()
    }

    pub fn r(&self) -> usize {
        self.obs1.len() + self.obs2.len()
    }

    /// Number of units surviving past the censoring time.
    pub fn censored(&self) -> usize {
        self.n - self.r()
    }
}

/// Sufficient statistics of a censored sample for a known Lomax scale.
///
/// `censor_log_term` is `ln(1 + T/delta)`, the exposure a censored unit adds
/// to the Lomax side; it is stored so the expansion code never recomputes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuffStats<F> {
    pub s1: F,
    pub s2: F,
    pub r1: usize,
    pub r2: usize,
    pub n: usize,
    pub censor_time: F,
    pub delta: F,
    pub censor_log_term: F,
}

impl<F: Scalar> SuffStats<F> {
    pub fn new(sample: &CensoredSample<F>, delta: F) -> Result<Self> {
        sample.validate()?;
        if !(delta > F::zero() && delta.is_finite()) {
            return Err(Error::domain("delta", to_f64(delta), "must be positive and finite"));
        }
        Ok(SuffStats {
            s1: sample.obs1.iter().copied().sum(),
            s2: sample.obs2.iter().map(|&x| (x / delta).ln_1p()).sum(),
            r1: sample.r1(),
            r2: sample.r2(),
            n: sample.n,
            censor_time: sample.censor_time,
            delta,
            censor_log_term: (sample.censor_time / delta).ln_1p(),
        })
    }

    pub fn censored(&self) -> usize {
        self.n - self.r1 - self.r2
    }
}

/// Survival mass of the mixture at the censoring time, split by component.
///
/// `c = p e^{-theta1 T} + (1-p)(1 + T/delta)^{-theta2}`; `w1` and `w2` are the
/// shares of `c` owed to each component (they sum to one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreContext<F> {
    pub ln_c: F,
    pub w1: F,
    pub w2: F,
    /// `(e^{-theta1 T} - (1 + T/delta)^{-theta2}) / c`
    pub contrast: F,
}

impl<F: Scalar> ScoreContext<F> {
    pub fn new(params: &Params<F>, censor_time: F) -> Self {
        let one = F::one();
        let log_term = (censor_time / params.delta).ln_1p();
        let ln_e = -params.theta1 * censor_time;
        let ln_q = -params.theta2 * log_term;
        let a = params.p.ln() + ln_e;
        let b = (one - params.p).ln() + ln_q;
        let ln_c = log_add_exp(a, b);
        let w1 = (a - ln_c).exp();
        let w2 = (b - ln_c).exp();
        ScoreContext {
            ln_c,
            w1,
            w2,
            contrast: w1 / params.p - w2 / (one - params.p),
        }
    }

    pub fn c(&self) -> F {
        self.ln_c.exp()
    }
}

/// Log of the direct-form likelihood, without the proportionality constant.
pub fn log_likelihood_direct<F: Scalar>(params: &Params<F>, sample: &CensoredSample<F>) -> Result<F> {
    params.validate()?;
    sample.validate()?;
    let one = F::one();
    let Params {
        theta1,
        theta2,
        p,
        delta,
    } = *params;
    let r1 = from_usize::<F>(sample.r1());
    let r2 = from_usize::<F>(sample.r2());
    let s1: F = sample.obs1.iter().copied().sum();
    let log_x_delta: F = sample.obs2.iter().map(|&x| (x + delta).ln()).sum();
    let mut l = r1 * p.ln() + r1 * theta1.ln() - theta1 * s1 + (r2 * (one - p).ln())
        + r2 * theta2.ln()
        + r2 * theta2 * delta.ln()
        - (theta2 + one) * log_x_delta;
    let m = sample.censored();
    if m > 0 {
        l = l + from_usize::<F>(m) * ScoreContext::new(params, sample.censor_time).ln_c;
    }
    Ok(l)
}

/// Log of the binomially expanded likelihood: a log-sum-exp over
/// `k = 0..=n-r` of the terms in which `k` censored units are credited to the
/// exponential component. Differs from [`log_likelihood_direct`] by a
/// constant that does not depend on the parameters.
pub fn log_likelihood_expanded<F: Scalar>(params: &Params<F>, sample: &CensoredSample<F>) -> Result<F> {
    params.validate()?;
    let stats = SuffStats::new(sample, params.delta)?;
    let one = F::one();
    let Params { theta1, theta2, p, .. } = *params;
    let m = stats.censored();
    let n = from_usize::<F>(stats.n);
    let r1 = from_usize::<F>(stats.r1);
    let r2 = from_usize::<F>(stats.r2);
    let terms = (0..=m).map(|k| {
        let kf = from_usize::<F>(k);
        let a = stats.s1 + stats.censor_time * kf;
        let b = stats.s2 + from_usize::<F>(m - k) * stats.censor_log_term;
        ln_binomial::<F>(m, k) - theta1 * a - theta2 * b
            + (kf + r1) * p.ln()
            + (n - kf - r1) * (one - p).ln()
    });
    Ok(r1 * theta1.ln() + r2 * theta2.ln() + log_sum_exp(terms))
}

/// Gradient of the log-likelihood in `(theta1, theta2, p)`.
pub fn score<F: Scalar>(params: &Params<F>, sample: &CensoredSample<F>) -> Result<[F; 3]> {
    params.validate()?;
    let stats = SuffStats::new(sample, params.delta)?;
    Ok(score_from_stats(params, &stats))
}

pub(crate) fn score_from_stats<F: Scalar>(params: &Params<F>, stats: &SuffStats<F>) -> [F; 3] {
    let one = F::one();
    let ctx = ScoreContext::new(params, stats.censor_time);
    let m = from_usize::<F>(stats.censored());
    let r1 = from_usize::<F>(stats.r1);
    let r2 = from_usize::<F>(stats.r2);
    [
        r1 / params.theta1 - stats.s1 - m * stats.censor_time * ctx.w1,
        r2 / params.theta2 - stats.s2 - m * stats.censor_log_term * ctx.w2,
        r1 / params.p - r2 / (one - params.p) + m * ctx.contrast,
    ]
}

/// Symmetric 3x3 matrix ordered `(theta1, theta2, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoMatrix<F>(pub [[F; 3]; 3]);

impl<F: Scalar> InfoMatrix<F> {
    pub fn get(&self, i: usize, j: usize) -> F {
        self.0[i][j]
    }

    pub fn determinant(&self) -> F {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by cofactors; `SingularInformation` when the determinant is
    /// not safely away from zero.
    pub fn inverse(&self) -> Result<InfoMatrix<F>> {
        let m = &self.0;
        let det = self.determinant();
        let scale = (0..3)
            .map(|i| (0..3).map(|j| m[i][j].abs()).fold(F::zero(), F::max))
            .fold(F::one(), |acc, row| acc * row);
        if !det.is_finite() || det.abs() <= lit::<F>(64.0) * F::epsilon() * scale {
            return Err(Error::SingularInformation);
        }
        let cof = |i: usize, j: usize| {
            let (r0, r1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            if (i + j).is_multiple_of(2) {
                minor
            } else {
                -minor
            }
        };
        let mut inv = [[F::zero(); 3]; 3];
        for (i, row) in inv.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                // adjugate is the transposed cofactor matrix
                *v = cof(j, i) / det;
            }
        }
        Ok(InfoMatrix(inv))
    }

    /// Whether the matrix is positive definite (leading principal minors).
    pub fn is_positive_definite(&self) -> bool {
        let m = &self.0;
        m[0][0] > F::zero() && m[0][0] * m[1][1] - m[0][1] * m[1][0] > F::zero() && self.determinant() > F::zero()
    }
}

/// Negated Hessian of the log-likelihood (observed information).
pub fn observed_information<F: Scalar>(params: &Params<F>, sample: &CensoredSample<F>) -> Result<InfoMatrix<F>> {
    params.validate()?;
    let stats = SuffStats::new(sample, params.delta)?;
    Ok(information_from_stats(params, &stats))
}

pub(crate) fn information_from_stats<F: Scalar>(params: &Params<F>, stats: &SuffStats<F>) -> InfoMatrix<F> {
    let one = F::one();
    let Params { theta1, theta2, p, .. } = *params;
    let ctx = ScoreContext::new(params, stats.censor_time);
    let m = from_usize::<F>(stats.censored());
    let r1 = from_usize::<F>(stats.r1);
    let r2 = from_usize::<F>(stats.r2);
    let t = stats.censor_time;
    let lt = stats.censor_log_term;
    let (w1, w2, d) = (ctx.w1, ctx.w2, ctx.contrast);

    let h11 = -r1 / (theta1 * theta1) + m * t * t * w1 * w2;
    let h22 = -r2 / (theta2 * theta2) + m * lt * lt * w1 * w2;
    let h33 = -r1 / (p * p) - r2 / ((one - p) * (one - p)) - m * d * d;
    let h12 = -m * t * lt * w1 * w2;
    let h13 = m * t * w1 * (d - one / p);
    let h23 = m * lt * w2 * (d + one / (one - p));

    InfoMatrix([[-h11, -h12, -h13], [-h12, -h22, -h23], [-h13, -h23, -h33]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    /// Infinity norm of the gradient in the solver's (log, log, logit) coordinates.
    pub gradient_norm: f64,
    /// Infinity norm of the score in the natural parameters.
    pub score_norm: f64,
    pub converged: bool,
    /// Whether the observed information is positive definite at the solution.
    pub positive_definite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlFit<F> {
    pub params: Params<F>,
    pub log_likelihood: F,
    pub report: ConvergenceReport,
}

const MAX_ITERATIONS: usize = 200;

fn from_unconstrained<F: Scalar>(z: [F; 3], delta: F) -> Params<F> {
    let one = F::one();
    Params {
        theta1: z[0].exp(),
        theta2: z[1].exp(),
        p: one / (one + (-z[2]).exp()),
        delta,
    }
}

fn to_unconstrained<F: Scalar>(params: &Params<F>) -> [F; 3] {
    [
        params.theta1.ln(),
        params.theta2.ln(),
        params.p.ln() - (F::one() - params.p).ln(),
    ]
}

fn log_likelihood_from_stats<F: Scalar>(params: &Params<F>, stats: &SuffStats<F>) -> F {
    // the direct form minus the parameter-free term sum ln(x2j + delta)
    let one = F::one();
    let r1 = from_usize::<F>(stats.r1);
    let r2 = from_usize::<F>(stats.r2);
    let mut l = r1 * (params.p.ln() + params.theta1.ln()) - params.theta1 * stats.s1
        + r2 * ((one - params.p).ln() + params.theta2.ln())
        - params.theta2 * stats.s2;
    let m = stats.censored();
    if m > 0 {
        l = l + from_usize::<F>(m) * ScoreContext::new(params, stats.censor_time).ln_c;
    }
    l
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky; `None`
/// when `a` is not positive definite.
fn cholesky_solve<F: Scalar>(a: [[F; 3]; 3], b: [F; 3]) -> Option<[F; 3]> {
    let mut l = [[F::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > F::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [F::zero(); 3];
    for i in 0..3 {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [F::zero(); 3];
    for i in (0..3).rev() {
        let mut s = y[i];
        for k in i + 1..3 {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

fn inf_norm<F: Scalar>(v: &[F; 3]) -> F {
    v.iter().fold(F::zero(), |acc, x| acc.max(x.abs()))
}

/// Maximum likelihood fit by damped Newton iterations on
/// `(ln theta1, ln theta2, logit p)`, which keeps every iterate feasible.
///
/// The default starting point is the uncensored closed form
/// `(r1/S1, r2/S2, r1/(r1+r2))`, which is also the exact answer when nothing
/// is censored.
pub fn ml_fit<F: Scalar>(sample: &CensoredSample<F>, delta: F, init: Option<Params<F>>) -> Result<MlFit<F>> {
    let stats = SuffStats::new(sample, delta)?;
    if stats.r1 == 0 || stats.r2 == 0 {
        return Err(Error::NoFailures {
            r1: stats.r1,
            r2: stats.r2,
        });
    }
    let one = F::one();
    let start = match init {
        Some(p) => {
            p.validate()?;
            Params { delta, ..p }
        }
        None => Params {
            theta1: from_usize::<F>(stats.r1) / stats.s1,
            theta2: from_usize::<F>(stats.r2) / stats.s2,
            p: from_usize::<F>(stats.r1) / from_usize::<F>(stats.r1 + stats.r2),
            delta,
        },
    };
    let tol = lit::<F>(1e-8).max(lit::<F>(1e4) * F::epsilon());
    let target = tol * lit(1e-3);

    let mut z = to_unconstrained(&start);
    let mut params = from_unconstrained(z, delta);
    let mut l = log_likelihood_from_stats(&params, &stats);
    let mut iterations = 0;
    let gradient_z = |params: &Params<F>| {
        let g = score_from_stats(params, &stats);
        let q = params.p * (one - params.p);
        ([g[0] * params.theta1, g[1] * params.theta2, g[2] * q], g)
    };
    let (mut gz, mut g) = gradient_z(&params);

    while iterations < MAX_ITERATIONS && inf_norm(&gz) > target {
        iterations += 1;
        // negative Hessian in the transformed coordinates
        let info = information_from_stats(&params, &stats).0;
        let q = params.p * (one - params.p);
        let jac = [params.theta1, params.theta2, q];
        let curv = [params.theta1, params.theta2, q * (one - lit::<F>(2.0) * params.p)];
        let mut neg_h = [[F::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                neg_h[i][j] = jac[i] * info[i][j] * jac[j];
            }
            neg_h[i][i] = neg_h[i][i] - g[i] * curv[i];
        }
        let mut shift = F::zero();
        let step = loop {
            let mut a = neg_h;
            (0..3).for_each(|i| a[i][i] = a[i][i] + shift);
            if let Some(s) = cholesky_solve(a, gz) {
                break s;
            }
            let diag_scale = (0..3).fold(F::zero(), |acc, i| acc.max(neg_h[i][i].abs())).max(one);
            shift = if shift == F::zero() {
                lit::<F>(1e-6) * diag_scale
            } else {
                shift * lit(10.0)
            };
        };
        let slope: F = (0..3).map(|i| gz[i] * step[i]).sum();
        let noise = lit::<F>(8.0) * F::epsilon() * (l.abs() + one);
        let mut t = one;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: [F; 3] = std::array::from_fn(|i| z[i] + t * step[i]);
            let cand_params = from_unconstrained(cand, delta);
            let cand_l = log_likelihood_from_stats(&cand_params, &stats);
            if cand_l.is_finite() && cand_l >= l + lit::<F>(1e-4) * t * slope - noise {
                let (cand_gz, cand_g) = gradient_z(&cand_params);
                // in the noise floor only accept steps that shrink the gradient
                if cand_l > l || inf_norm(&cand_gz) < inf_norm(&gz) {
                    z = cand;
                    params = cand_params;
                    l = cand_l;
                    gz = cand_gz;
                    g = cand_g;
                    accepted = true;
                }
                break;
            }
            t = t * lit(0.5);
        }
        if !accepted {
            break;
        }
    }

    let gradient_norm = to_f64(inf_norm(&gz));
    let converged = inf_norm(&gz) <= tol;
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            gradient_norm,
            best: params.triple().map(to_f64),
        });
    }
    let positive_definite = information_from_stats(&params, &stats).is_positive_definite();
    Ok(MlFit {
        params,
        log_likelihood: l,
        report: ConvergenceReport {
            iterations,
            gradient_norm,
            score_norm: to_f64(inf_norm(&g)),
            converged,
            positive_definite,
        },
    })
}

/// Diagonal of the inverse observed information at `params`.
pub fn ml_variances<F: Scalar>(params: &Params<F>, sample: &CensoredSample<F>) -> Result<[F; 3]> {
    let inv = observed_information(params, sample)?.inverse()?;
    let diag = [inv.get(0, 0), inv.get(1, 1), inv.get(2, 2)];
    if diag.iter().any(|v| !(*v > F::zero()) || !v.is_finite()) {
        return Err(Error::SingularInformation);
    }
    Ok(diag)
}
