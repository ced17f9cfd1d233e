//! Component densities, the exponential-Lomax mixture and exact sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Scalar};

/// A parameter point of the mixture.
///
/// `theta1` is the exponential rate, `theta2` the Lomax shape, `p` the
/// proportion of the exponential component and `delta` the (known) Lomax
/// scale, in the same time units as the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params<F> {
    pub theta1: F,
    pub theta2: F,
    pub p: F,
    pub delta: F,
}

impl<F: Scalar> Params<F> {
    pub fn new(theta1: F, theta2: F, p: F, delta: F) -> Result<Self> {
        let params = Params {
            theta1,
            theta2,
            p,
            delta,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: F| {
            if v > F::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(name, to_f64(v), "must be positive and finite"))
            }
        };
        positive("theta1", self.theta1)?;
        positive("theta2", self.theta2)?;
        positive("delta", self.delta)?;
        if !(self.p > F::zero() && self.p < F::one()) {
            return Err(Error::domain("p", to_f64(self.p), "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// The estimated coordinates `(theta1, theta2, p)`.
    pub fn triple(&self) -> [F; 3] {
        [self.theta1, self.theta2, self.p]
    }
}

/// Subpopulation a lifetime came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Exponential,
    Lomax,
}

impl Component {
    /// 1-based index used in data files.
    pub fn index(self) -> u8 {
        match self {
            Component::Exponential => 1,
            Component::Lomax => 2,
        }
    }

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            1 => Some(Component::Exponential),
            2 => Some(Component::Lomax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledLifetime<F> {
    pub time: F,
    pub component: Component,
}

fn check_x<F: Scalar>(x: F) -> Result<()> {
    if x >= F::zero() {
        Ok(())
    } else {
        Err(Error::domain("x", to_f64(x), "must be nonnegative"))
    }
}

fn check_positive<F: Scalar>(name: &'static str, v: F) -> Result<()> {
    if v > F::zero() {
        Ok(())
    } else {
        Err(Error::domain(name, to_f64(v), "must be positive"))
    }
}

pub fn exp_pdf<F: Scalar>(x: F, theta1: F) -> Result<F> {
    check_x(x)?;
    check_positive("theta1", theta1)?;
    Ok(theta1 * (-theta1 * x).exp())
}

pub fn exp_cdf<F: Scalar>(x: F, theta1: F) -> Result<F> {
    check_x(x)?;
    check_positive("theta1", theta1)?;
    Ok(-(-theta1 * x).exp_m1())
}

/// Lomax density `theta2 delta^theta2 (x + delta)^-(theta2 + 1)`, evaluated
/// in log space; `delta^theta2` alone overflows for realistic inputs.
pub fn lomax_pdf<F: Scalar>(x: F, theta2: F, delta: F) -> Result<F> {
    check_x(x)?;
    check_positive("theta2", theta2)?;
    check_positive("delta", delta)?;
    Ok(ln_lomax_pdf(x, theta2, delta).exp())
}

pub(crate) fn ln_lomax_pdf<F: Scalar>(x: F, theta2: F, delta: F) -> F {
    // ln theta2 + theta2 ln delta - (theta2 + 1) ln(x + delta), regrouped
    theta2.ln() - delta.ln() - (theta2 + F::one()) * (x / delta).ln_1p()
}

pub fn lomax_cdf<F: Scalar>(x: F, theta2: F, delta: F) -> Result<F> {
    check_x(x)?;
    check_positive("theta2", theta2)?;
    check_positive("delta", delta)?;
    Ok(-(-theta2 * (x / delta).ln_1p()).exp_m1())
}

pub fn mixture_pdf<F: Scalar>(x: F, params: &Params<F>) -> Result<F> {
    params.validate()?;
    let one = F::one();
    Ok(params.p * exp_pdf(x, params.theta1)?
        + (one - params.p) * lomax_pdf(x, params.theta2, params.delta)?)
}

pub fn mixture_cdf<F: Scalar>(x: F, params: &Params<F>) -> Result<F> {
    params.validate()?;
    let one = F::one();
    Ok(params.p * exp_cdf(x, params.theta1)?
        + (one - params.p) * lomax_cdf(x, params.theta2, params.delta)?)
}

/// `1 - mixture_cdf(x)`, computed directly so it keeps relative accuracy in
/// the upper tail.
pub fn mixture_survival<F: Scalar>(x: F, params: &Params<F>) -> Result<F> {
    params.validate()?;
    check_x(x)?;
    let one = F::one();
    Ok(params.p * (-params.theta1 * x).exp()
        + (one - params.p) * (-params.theta2 * (x / params.delta).ln_1p()).exp())
}

/// Inverse CDF of one component at `u` in `[0, 1)`.
pub fn component_quantile<F: Scalar>(component: Component, u: F, params: &Params<F>) -> F {
    // -ln(1 - u), the unit-exponential quantile
    let e = -(-u).ln_1p();
    match component {
        Component::Exponential => e / params.theta1,
        Component::Lomax => params.delta * (e / params.theta2).exp_m1(),
    }
}

/// One labeled draw from the mixture: the first uniform picks the component,
/// the second is pushed through that component's inverse CDF.
pub fn mixture_draw<F: Scalar, R: Rng + ?Sized>(params: &Params<F>, rng: &mut R) -> LabeledLifetime<F> {
    let label_u: f64 = rng.random();
    let time_u: f64 = rng.random();
    let component = if label_u < to_f64(params.p) {
        Component::Exponential
    } else {
        Component::Lomax
    };
    LabeledLifetime {
        time: component_quantile(component, lit(time_u), params),
        component,
    }
}

/// `count` independent labeled lifetimes from the mixture.
pub fn mixture_sample<F: Scalar, R: Rng + ?Sized>(
    params: &Params<F>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<LabeledLifetime<F>>> {
    params.validate()?;
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    Ok((0..count).map(|_| mixture_draw(params, rng)).collect())
}
