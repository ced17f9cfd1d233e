//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 estimator
//! domain error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bayes_closed::{bayes_gelf, bayes_self, posterior_variance, LossSpec, PosteriorExpansion, Prior};
use crate::distributions::{Component, Params};
use crate::error::Error;
use crate::importance_sampling::{is_draws, is_estimate};
use crate::likelihood::{ml_fit, ml_variances, CensoredSample};
use crate::predictive::Predictive;
use crate::simulation::{generate_censored_sample, run_study, substream, EstimatorSpec, Method, StudyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ESTIMATOR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "explomax", version, about = "Exponential-Lomax mixture estimation for type-I censored lifetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point estimates with their uncertainty summary.
    Fit(FitArgs),
    /// Posterior predictive median and equal-tail interval.
    Predict(PredictArgs),
    /// Monte-Carlo study of estimator means and risks.
    Simulate(SimulateArgs),
    /// Writes a simulated censored sample as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with header `time,component`, one row per observed failure.
    #[arg(long)]
    input: PathBuf,
    /// Units on test, including those still running at the censoring time.
    #[arg(long)]
    n: usize,
    #[arg(long = "censor-time")]
    censor_time: f64,
    /// Lomax scale, in the time units of the data.
    #[arg(long)]
    delta: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ml,
    Bayes,
    Is,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ml => Method::Ml,
            MethodArg::Bayes => Method::Bayes,
            MethodArg::Is => Method::Is,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PriorArg {
    Uniform,
    Jeffreys,
}

impl From<PriorArg> for Prior {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Uniform => Prior::Uniform,
            PriorArg::Jeffreys => Prior::Jeffreys,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    #[value(name = "self")]
    Squared,
    Gelf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "ml")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "uniform")]
    prior: PriorArg,
    #[arg(long, value_enum, default_value = "self")]
    loss: LossArg,
    /// General entropy loss parameter.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    #[arg(long = "is-samples", default_value_t = crate::importance_sampling::DEFAULT_DRAWS)]
    is_samples: usize,
    /// Required by the importance-sampling method.
    #[arg(long)]
    seed: Option<u64>,
    /// True `theta1,theta2,p`; enables loss-at-truth risks.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    truth: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "uniform")]
    prior: PriorArg,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct TruthArgs {
    #[arg(long)]
    theta1: f64,
    #[arg(long)]
    theta2: f64,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    n: usize,
    #[arg(long = "censor-time")]
    censor_time: f64,
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    truth: TruthArgs,
    #[arg(long)]
    reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ml,bayes,is")]
    methods: Vec<MethodArg>,
    /// GELF parameters; SELF is always included.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    c: Vec<f64>,
    #[arg(long = "is-samples", default_value_t = crate::importance_sampling::DEFAULT_DRAWS)]
    is_samples: usize,
    /// Also summarize predictive intervals at this level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Worker threads; the report does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    truth: TruthArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain { .. } | Error::InvalidSample(_) | Error::InvalidConfig(_) => EXIT_INPUT,
            _ => EXIT_ESTIMATOR,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out, err),
        Command::Generate(a) => cmd_generate(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Parses a `time,component` CSV into a censored sample, checking each row.
pub fn read_sample<R: Read>(reader: R, n: usize, censor_time: f64) -> std::result::Result<CensoredSample<f64>, String> {
    if !(censor_time > 0.0 && censor_time.is_finite()) {
        return Err(format!("censor time must be positive and finite, got {censor_time}"));
    }
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| format!("unreadable header: {e}"))?;
    if header.iter().collect::<Vec<_>>() != ["time", "component"] {
        return Err(format!("header must be `time,component`, got `{}`", header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut obs1 = Vec::new();
    let mut obs2 = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| format!("row {row}: {e}"))?;
        if record.len() != 2 {
            return Err(format!("row {row}: expected 2 fields, found {}", record.len()));
        }
        let time: f64 = record[0]
            .parse()
            .map_err(|_| format!("row {row}: time `{}` is not a number", &record[0]))?;
        if !(time > 0.0 && time <= censor_time) {
            return Err(format!("row {row}: time {time} outside (0, {censor_time}]"));
        }
        let component = record[1]
            .parse::<u8>()
            .ok()
            .and_then(Component::from_index)
            .ok_or_else(|| format!("row {row}: component `{}` must be 1 or 2", &record[1]))?;
        match component {
            Component::Exponential => obs1.push(time),
            Component::Lomax => obs2.push(time),
        }
    }
    let r = obs1.len() + obs2.len();
    if r > n {
        return Err(format!("{r} failure rows exceed n = {n}"));
    }
    CensoredSample::new(obs1, obs2, n, censor_time).map_err(|e| e.to_string())
}

/// Writes the observed failures of `sample` as `time,component` CSV, in a
/// form [`read_sample`] reads back exactly.
pub fn write_sample<W: Write>(sample: &CensoredSample<f64>, writer: W) -> std::io::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["time", "component"])?;
    for (obs, c) in [(&sample.obs1, Component::Exponential), (&sample.obs2, Component::Lomax)] {
        for t in obs {
            csv.write_record([format!("{t:?}"), c.index().to_string()])?;
        }
    }
    csv.flush()
}

fn load(data: &DataArgs) -> CliResult<CensoredSample<f64>> {
    if !(data.delta > 0.0 && data.delta.is_finite()) {
        return Err(input_error(format!("--delta must be positive and finite, got {}", data.delta)));
    }
    let file = File::open(&data.input).map_err(|e| input_error(format!("{}: {e}", data.input.display())))?;
    read_sample(file, data.n, data.censor_time).map_err(|m| input_error(format!("{}: {m}", data.input.display())))
}

fn triple_json(v: [f64; 3]) -> Value {
    json!({ "theta1": v[0], "theta2": v[1], "p": v[2] })
}

fn emit(out: &mut dyn Write, format: Format, report: &Value) -> CliResult<()> {
    let text = match format {
        Format::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        Format::Table => table(report),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| input_error(format!("cannot write output: {e}")))
}

/// Flat `key  value` rendering of a JSON report.
fn table(report: &Value) -> String {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, rows);
                }
            }
            Value::Null => rows.push((prefix.to_string(), "-".to_string())),
            Value::String(s) => rows.push((prefix.to_string(), s.clone())),
            other => rows.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", report, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn loss_from(loss: LossArg, c: Option<f64>) -> CliResult<LossSpec<f64>> {
    match (loss, c) {
        (LossArg::Squared, _) => Ok(LossSpec::Squared),
        (LossArg::Gelf, Some(c)) => Ok(LossSpec::gelf(c)?),
        (LossArg::Gelf, None) => Err(input_error("--loss gelf needs --c")),
    }
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let sample = load(&a.data)?;
    let delta = a.data.delta;
    let loss = loss_from(a.loss, a.c)?;
    let truth = match &a.truth {
        None => None,
        Some(t) if t.len() != 3 => return Err(input_error(format!("--truth needs 3 values, got {}", t.len()))),
        Some(t) => Some(Params::new(t[0], t[1], t[2], delta).map_err(|e| input_error(format!("--truth: {e}")))?),
    };
    let prior: Prior = a.prior.into();
    let method: Method = a.method.into();
    let (estimate, uncertainty, diagnostics) = match method {
        Method::Ml => {
            let fit = ml_fit(&sample, delta, None)?;
            let variances = match ml_variances(&fit.params, &sample) {
                Ok(v) => triple_json(v),
                Err(_) => Value::Null,
            };
            let r = &fit.report;
            (
                fit.params.triple(),
                json!({ "variances": variances }),
                json!({
                    "log_likelihood": fit.log_likelihood,
                    "iterations": r.iterations,
                    "gradient_norm": r.gradient_norm,
                    "score_norm": r.score_norm,
                    "converged": r.converged,
                    "positive_definite": r.positive_definite,
                }),
            )
        }
        Method::Bayes => {
            let exp = PosteriorExpansion::new(&sample, delta, prior)?;
            let est = match loss {
                LossSpec::Squared => bayes_self(&exp)?,
                LossSpec::GeneralEntropy { c } => bayes_gelf(&exp, c)?,
            };
            let var = posterior_variance(&exp)?;
            (
                est.to_array(),
                json!({ "posterior_variances": triple_json(var.to_array()) }),
                json!({ "expansion_terms": exp.terms.len(), "log_normalizer": exp.log_h }),
            )
        }
        Method::Is => {
            let seed = a
                .seed
                .ok_or_else(|| input_error("--method is needs --seed"))?;
            let mut rng = substream(seed, 0, 0);
            let draws = is_draws(&sample, delta, prior, a.is_samples, &mut rng)?;
            let est = is_estimate(&draws, &loss)?;
            (
                est.estimate.to_array(),
                json!({ "std_errors": triple_json(est.std_error.to_array()) }),
                json!({ "ess": est.ess, "weight_ratio": est.weight_ratio, "draws": est.draws }),
            )
        }
    };
    let risks = match truth {
        None => Value::Null,
        Some(t) => {
            let t = t.triple();
            let mut r = [0.0; 3];
            for i in 0..3 {
                r[i] = loss.evaluate(t[i], estimate[i])?;
            }
            triple_json(r)
        }
    };
    let report = json!({
        "config": {
            "command": "fit",
            "input": a.data.input.display().to_string(),
            "n": sample.n,
            "r1": sample.r1(),
            "r2": sample.r2(),
            "censor_time": sample.censor_time,
            "delta": delta,
            "method": method.name(),
            "prior": if method == Method::Ml { Value::Null } else { json!(prior.name()) },
            "loss": loss.label(),
            "is_samples": if method == Method::Is { json!(a.is_samples) } else { Value::Null },
            "seed": a.seed,
        },
        "estimates": triple_json(estimate),
        "uncertainty": uncertainty,
        "risks": risks,
        "diagnostics": diagnostics,
    });
    emit(out, a.format, &report)
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> CliResult<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(input_error(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let sample = load(&a.data)?;
    let prior: Prior = a.prior.into();
    let exp = PosteriorExpansion::new(&sample, a.data.delta, prior)?;
    let pred = Predictive::new(&exp)?;
    let s = pred.interval(a.alpha)?;
    let report = json!({
        "config": {
            "command": "predict",
            "input": a.data.input.display().to_string(),
            "n": sample.n,
            "r1": sample.r1(),
            "r2": sample.r2(),
            "censor_time": sample.censor_time,
            "delta": a.data.delta,
            "prior": prior.name(),
            "alpha": a.alpha,
        },
        "estimates": { "median": s.median, "lower": s.lower, "upper": s.upper },
        "uncertainty": { "level": 1.0 - a.alpha },
        "risks": Value::Null,
        "diagnostics": {
            "cdf_lower": pred.cdf(s.lower)?,
            "cdf_median": pred.cdf(s.median)?,
            "cdf_upper": pred.cdf(s.upper)?,
        },
    });
    emit(out, a.format, &report)
}

fn truth_params(t: &TruthArgs) -> CliResult<Params<f64>> {
    Ok(Params::new(t.theta1, t.theta2, t.p, t.delta)?)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    let config = StudyConfig {
        true_params: truth_params(&a.truth)?,
        n: a.truth.n,
        censor_time: a.truth.censor_time,
        reps: a.reps,
        seed: a.truth.seed,
        estimators: EstimatorSpec::grid(&methods, &a.c).map_err(|e| input_error(e.to_string()))?,
        is_m: a.is_samples,
        alpha: a.alpha,
    };
    let report = match a.threads {
        Some(t) => crate::simulation::run_study_with_threads(&config, t)?,
        None => run_study(&config)?,
    };
    let _ = writeln!(err, "wall time: {:.3} s", report.wall_time.as_secs_f64());
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Table => report.to_table(),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| input_error(format!("cannot write output: {e}")))
}

fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> CliResult<()> {
    let params = truth_params(&a.truth)?;
    if !(a.truth.censor_time > 0.0) {
        return Err(input_error("--censor-time must be positive"));
    }
    let mut rng = substream(a.truth.seed, 0, 0);
    let sample = generate_censored_sample(&params, a.truth.n, a.truth.censor_time, &mut rng)?;
    let io = |e: std::io::Error| input_error(format!("cannot write sample: {e}"));
    match &a.output {
        Some(path) => write_sample(&sample, File::create(path).map_err(io)?).map_err(io),
        None => write_sample(&sample, out).map_err(io),
    }
}
