//! Monte-Carlo studies of estimator means and risks.
//!
//! Each replication draws a fresh censored sample and feeds it to every
//! configured estimator. Replications run in parallel; each gets its own
//! random substreams derived from `(seed, replication, slot)`, and results
//! are reduced in replication order, so a report depends only on its config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes_closed::{bayes_gelf, bayes_self, LossSpec, PointEstimate, PosteriorExpansion, Prior};
use crate::distributions::{mixture_sample, Params};
use crate::error::{Error, Result};
use crate::importance_sampling::{is_draws, is_estimate, WeightedDraw};
use crate::likelihood::{ml_fit, CensoredSample};
use crate::predictive::{predictive_interval, PredictiveSummary};
use crate::scalar::{from_usize, to_f64, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ml,
    /// Closed-form Bayes estimators.
    Bayes,
    /// Importance-sampling approximations of the Bayes estimators.
    Is,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ml => "ml",
            Method::Bayes => "bayes",
            Method::Is => "is",
        }
    }
}

/// One column of a study: an estimator and the loss its risk is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec<F> {
    pub method: Method,
    pub prior: Option<Prior>,
    pub loss: LossSpec<F>,
}

impl<F: Scalar> EstimatorSpec<F> {
    pub fn ml(loss: LossSpec<F>) -> Self {
        EstimatorSpec {
            method: Method::Ml,
            prior: None,
            loss,
        }
    }

    pub fn bayes(prior: Prior, loss: LossSpec<F>) -> Self {
        EstimatorSpec {
            method: Method::Bayes,
            prior: Some(prior),
            loss,
        }
    }

    pub fn is(prior: Prior, loss: LossSpec<F>) -> Self {
        EstimatorSpec {
            method: Method::Is,
            prior: Some(prior),
            loss,
        }
    }

    /// Every method crossed with both priors (Bayes methods only) and with
    /// SELF plus GELF at each `c`.
    pub fn grid(methods: &[Method], gelf_c: &[F]) -> Result<Vec<Self>> {
        let mut losses = vec![LossSpec::Squared];
        for &c in gelf_c {
            losses.push(LossSpec::gelf(c)?);
        }
        let mut out = Vec::new();
        for &loss in &losses {
            for &method in methods {
                match method {
                    Method::Ml => out.push(Self::ml(loss)),
                    Method::Bayes | Method::Is => {
                        for prior in [Prior::Uniform, Prior::Jeffreys] {
                            out.push(EstimatorSpec {
                                method,
                                prior: Some(prior),
                                loss,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        match (self.method, self.prior) {
            (Method::Ml, Some(_)) => Err(Error::InvalidConfig("ML estimator takes no prior".into())),
            (Method::Bayes | Method::Is, None) => Err(Error::InvalidConfig(format!(
                "{} estimator needs a prior",
                self.method.name()
            ))),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self.prior {
            None => format!("{}/{}", self.method.name(), self.loss.label()),
            Some(prior) => format!("{}-{}/{}", self.method.name(), prior.name(), self.loss.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig<F> {
    pub true_params: Params<F>,
    pub n: usize,
    pub censor_time: F,
    pub reps: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorSpec<F>>,
    /// Importance sample count per replication.
    pub is_m: usize,
    /// Predictive level; `None` skips the predictive summaries.
    pub alpha: Option<F>,
}

impl<F: Scalar> StudyConfig<F> {
    pub fn validate(&self) -> Result<()> {
        self.true_params.validate()?;
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.censor_time > F::zero()) {
            return Err(Error::InvalidConfig(format!(
                "censor time must be positive, got {}",
                self.censor_time
            )));
        }
        if self.is_m == 0 && self.estimators.iter().any(|e| e.method == Method::Is) {
            return Err(Error::InvalidConfig("importance sample count must be at least 1".into()));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > F::zero() && alpha < F::one()) {
                return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
            }
        }
        self.estimators.iter().try_for_each(EstimatorSpec::validate)
    }
}

/// Mean estimate and estimated risk of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCell<F> {
    pub label: String,
    pub spec: EstimatorSpec<F>,
    pub used: usize,
    pub skipped: usize,
    /// Skipped replications by error kind.
    pub skip_reasons: BTreeMap<String, usize>,
    pub mean: Option<PointEstimate<F>>,
    pub risk: Option<PointEstimate<F>>,
}

/// Predictive summaries aggregated over replications for one prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveCell<F> {
    pub prior: Prior,
    pub used: usize,
    pub skipped: usize,
    pub skip_reasons: BTreeMap<String, usize>,
    /// Per-replication `(median, lower, upper)` reduced by their medians.
    pub median_of: Option<[F; 3]>,
    /// Per-replication `(median, lower, upper)` reduced by their means.
    pub mean_of: Option<[F; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport<F> {
    pub config: StudyConfig<F>,
    pub cells: Vec<EstimatorCell<F>>,
    pub predictive: Vec<PredictiveCell<F>>,
    /// Share of replications, among those where both intervals exist, in
    /// which the Jeffreys interval is wider than the uniform one.
    pub jeffreys_wider_share: Option<F>,
    /// Excluded from serialization so reports stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Draws `n` labeled lifetimes and censors them at `censor_time`.
pub fn generate_censored_sample<F: Scalar, R: Rng + ?Sized>(
    true_params: &Params<F>,
    n: usize,
    censor_time: F,
    rng: &mut R,
) -> Result<CensoredSample<F>> {
    let draws = mixture_sample(true_params, n, rng)?;
    CensoredSample::censor(&draws, censor_time)
}

/// Mean loss of `estimates` against `truth`.
pub fn estimated_risk<F: Scalar>(estimates: &[F], truth: F, loss: &LossSpec<F>) -> Result<F> {
    loss.validate()?;
    if estimates.is_empty() {
        return Err(Error::InvalidConfig("risk needs at least one estimate".into()));
    }
    let total = estimates
        .iter()
        .map(|&e| loss.evaluate(truth, e))
        .collect::<Result<Vec<F>>>()?
        .into_iter()
        .sum::<F>();
    Ok(total / from_usize(estimates.len()))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for `slot` of replication `rep`.
pub fn substream(seed: u64, rep: u64, slot: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(splitmix64(splitmix64(splitmix64(seed) ^ rep) ^ slot))
}

const SAMPLE_SLOT: u64 = 0;

fn prior_slot(prior: Prior) -> u64 {
    match prior {
        Prior::Uniform => 1,
        Prior::Jeffreys => 2,
    }
}

type Outcome<T> = std::result::Result<T, &'static str>;

struct Replication<F> {
    estimates: Vec<Outcome<[F; 3]>>,
    predictive: Vec<Outcome<PredictiveSummary<F>>>,
}

const PRIORS: [Prior; 2] = [Prior::Uniform, Prior::Jeffreys];

fn replicate<F: Scalar>(config: &StudyConfig<F>, rep: u64) -> Replication<F> {
    let delta = config.true_params.delta;
    let mut rng = substream(config.seed, rep, SAMPLE_SLOT);
    let sample = match generate_censored_sample(&config.true_params, config.n, config.censor_time, &mut rng) {
        Ok(s) => s,
        Err(e) => {
            return Replication {
                estimates: vec![Err(e.kind()); config.estimators.len()],
                predictive: vec![Err(e.kind()); if config.alpha.is_some() { 2 } else { 0 }],
            }
        }
    };
    // the same samples are dropped for every estimator so columns compare
    if sample.r1() == 0 || sample.r2() == 0 {
        let kind = Error::NoFailures {
            r1: sample.r1(),
            r2: sample.r2(),
        }
        .kind();
        return Replication {
            estimates: vec![Err(kind); config.estimators.len()],
            predictive: vec![Err(kind); if config.alpha.is_some() { 2 } else { 0 }],
        };
    }

    let mut ml = None;
    let mut expansions: [Option<Result<PosteriorExpansion<F>>>; 2] = [None, None];
    let mut draws: [Option<Result<Vec<WeightedDraw<F>>>>; 2] = [None, None];
    let mut expansion = |prior: Prior| -> Result<PosteriorExpansion<F>> {
        expansions[prior_slot(prior) as usize - 1]
            .get_or_insert_with(|| PosteriorExpansion::new(&sample, delta, prior))
            .clone()
    };

    let mut estimates = Vec::with_capacity(config.estimators.len());
    for spec in &config.estimators {
        let result: Result<[F; 3]> = match (spec.method, spec.prior) {
            (Method::Ml, _) => ml
                .get_or_insert_with(|| ml_fit(&sample, delta, None))
                .clone()
                .map(|fit| fit.params.triple()),
            (Method::Bayes, Some(prior)) => expansion(prior).and_then(|exp| match spec.loss {
                LossSpec::Squared => bayes_self(&exp).map(|e| e.to_array()),
                LossSpec::GeneralEntropy { c } => bayes_gelf(&exp, c).map(|e| e.to_array()),
            }),
            (Method::Is, Some(prior)) => draws[prior_slot(prior) as usize - 1]
                .get_or_insert_with(|| {
                    let mut rng = substream(config.seed, rep, prior_slot(prior));
                    is_draws(&sample, delta, prior, config.is_m, &mut rng)
                })
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|d| is_estimate(d, &spec.loss))
                .map(|e| e.estimate.to_array()),
            (_, None) => Err(Error::InvalidConfig("Bayes estimator without prior".into())),
        };
        estimates.push(result.map_err(|e| e.kind()));
    }

    let predictive = match config.alpha {
        None => Vec::new(),
        Some(alpha) => PRIORS
            .iter()
            .map(|&prior| {
                expansion(prior)
                    .and_then(|exp| predictive_interval(&exp, alpha))
                    .map_err(|e| e.kind())
            })
            .collect(),
    };
    Replication { estimates, predictive }
}

fn tally<T>(outcomes: impl Iterator<Item = Outcome<T>>) -> (Vec<T>, BTreeMap<String, usize>) {
    let mut ok = Vec::new();
    let mut reasons = BTreeMap::new();
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(kind) => *reasons.entry(kind.to_string()).or_insert(0) += 1,
        }
    }
    (ok, reasons)
}

fn median<F: Scalar>(mut v: Vec<F>) -> F {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite predictive bounds"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / (F::one() + F::one())
    }
}

fn mean<F: Scalar>(v: &[F]) -> F {
    v.iter().copied().sum::<F>() / from_usize(v.len())
}

/// Runs the study on the global rayon pool.
pub fn run_study<F: Scalar>(config: &StudyConfig<F>) -> Result<StudyReport<F>> {
    config.validate()?;
    let start = Instant::now();
    let reps: Vec<Replication<F>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| replicate(config, rep))
        .collect();
    let mut report = reduce(config, &reps)?;
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Runs the study on a dedicated pool of `threads` workers.
pub fn run_study_with_threads<F: Scalar>(config: &StudyConfig<F>, threads: usize) -> Result<StudyReport<F>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_study(config))
}

fn reduce<F: Scalar>(config: &StudyConfig<F>, reps: &[Replication<F>]) -> Result<StudyReport<F>> {
    let truth = config.true_params.triple();
    let mut cells = Vec::with_capacity(config.estimators.len());
    for (j, spec) in config.estimators.iter().enumerate() {
        let (ok, skip_reasons) = tally(reps.iter().map(|r| r.estimates[j]));
        let (mean_est, risk) = if ok.is_empty() {
            (None, None)
        } else {
            let mut m = [F::zero(); 3];
            let mut risk = [F::zero(); 3];
            for i in 0..3 {
                let coord: Vec<F> = ok.iter().map(|e| e[i]).collect();
                m[i] = mean(&coord);
                risk[i] = estimated_risk(&coord, truth[i], &spec.loss)?;
            }
            (Some(PointEstimate::from_array(m)), Some(PointEstimate::from_array(risk)))
        };
        cells.push(EstimatorCell {
            label: spec.label(),
            spec: *spec,
            used: ok.len(),
            skipped: reps.len() - ok.len(),
            skip_reasons,
            mean: mean_est,
            risk,
        });
    }

    let mut predictive = Vec::new();
    let mut jeffreys_wider_share = None;
    if let Some(alpha) = config.alpha {
        for (j, &prior) in PRIORS.iter().enumerate() {
            let (ok, skip_reasons) = tally(reps.iter().map(|r| r.predictive[j]));
            let summarize = |reduce: fn(Vec<F>) -> F| -> Option<[F; 3]> {
                if ok.is_empty() {
                    return None;
                }
                Some([
                    reduce(ok.iter().map(|s| s.median).collect()),
                    reduce(ok.iter().map(|s| s.lower).collect()),
                    reduce(ok.iter().map(|s| s.upper).collect()),
                ])
            };
            predictive.push(PredictiveCell {
                prior,
                used: ok.len(),
                skipped: reps.len() - ok.len(),
                skip_reasons,
                median_of: summarize(median),
                mean_of: summarize(|v| mean(&v)),
            });
        }
        let pairs: Vec<bool> = reps
            .iter()
            .filter_map(|r| match (&r.predictive[0], &r.predictive[1]) {
                (Ok(u), Ok(j)) => Some(j.width() > u.width()),
                _ => None,
            })
            .collect();
        if !pairs.is_empty() {
            let wider = pairs.iter().filter(|&&w| w).count();
            jeffreys_wider_share = Some(from_usize::<F>(wider) / from_usize(pairs.len()));
        }
        debug_assert!(alpha > F::zero());
    }

    Ok(StudyReport {
        config: config.clone(),
        cells,
        predictive,
        jeffreys_wider_share,
        wall_time: Duration::ZERO,
    })
}

fn fmt_opt<F: Scalar>(v: Option<F>) -> String {
    match v {
        Some(x) => format!("{:>12.5}", to_f64(x)),
        None => format!("{:>12}", "-"),
    }
}

impl<F: Scalar> StudyReport<F> {
    /// Aligned text layout: an estimate row with its risk row beneath.
    pub fn to_table(&self) -> String {
        let c = &self.config;
        let p = &c.true_params;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "n = {}, T = {}, theta1 = {}, theta2 = {}, p = {}, delta = {}, reps = {}, seed = {}",
            c.n, c.censor_time, p.theta1, p.theta2, p.p, p.delta, c.reps, c.seed
        );
        let _ = writeln!(
            out,
            "{:<28} {:<8} {:>12} {:>12} {:>12} {:>6} {:>7}",
            "estimator", "", "theta1", "theta2", "p", "used", "skipped"
        );
        for cell in &self.cells {
            let m = cell.mean.map(|e| e.to_array());
            let r = cell.risk.map(|e| e.to_array());
            let _ = writeln!(
                out,
                "{:<28} {:<8} {} {} {} {:>6} {:>7}",
                cell.label,
                "estimate",
                fmt_opt(m.map(|v| v[0])),
                fmt_opt(m.map(|v| v[1])),
                fmt_opt(m.map(|v| v[2])),
                cell.used,
                cell.skipped
            );
            let _ = writeln!(
                out,
                "{:<28} {:<8} {} {} {}",
                "",
                "risk",
                fmt_opt(r.map(|v| v[0])),
                fmt_opt(r.map(|v| v[1])),
                fmt_opt(r.map(|v| v[2]))
            );
        }
        if let Some(alpha) = c.alpha {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "predictive, alpha = {alpha} (median over replications)\n{:<28} {:>12} {:>12} {:>12} {:>6} {:>7}",
                "prior", "median", "L", "U", "used", "skipped"
            );
            for cell in &self.predictive {
                let v = cell.median_of;
                let _ = writeln!(
                    out,
                    "{:<28} {} {} {} {:>6} {:>7}",
                    cell.prior.name(),
                    fmt_opt(v.map(|v| v[0])),
                    fmt_opt(v.map(|v| v[1])),
                    fmt_opt(v.map(|v| v[2])),
                    cell.used,
                    cell.skipped
                );
            }
            if let Some(share) = self.jeffreys_wider_share {
                let _ = writeln!(out, "jeffreys interval wider in {:.1}% of replications", 100.0 * to_f64(share));
            }
        }
        out
    }
}
