//! Exponential-Lomax mixture under type-I censoring: maximum likelihood,
//! closed-form and importance-sampling Bayes estimators, posterior
//! predictive intervals and Monte-Carlo risk studies.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the usual double-precision choice.

// `!(x > 0)` is the intended spelling: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bayes_closed;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod importance_sampling;
pub mod likelihood;
pub mod predictive;
pub mod scalar;
pub mod simulation;

pub use bayes_closed::{LossSpec, PointEstimate, PosteriorExpansion, Prior};
pub use distributions::{Component, LabeledLifetime, Params};
pub use error::{Error, Result};
pub use likelihood::{CensoredSample, MlFit, SuffStats};
pub use predictive::PredictiveSummary;
pub use scalar::Scalar;
pub use simulation::{EstimatorSpec, Method, StudyConfig, StudyReport};

pub type Params64 = Params<f64>;
pub type CensoredSample64 = CensoredSample<f64>;
pub type SuffStats64 = SuffStats<f64>;
pub type LossSpec64 = LossSpec<f64>;
pub type PointEstimate64 = PointEstimate<f64>;
pub type PosteriorExpansion64 = PosteriorExpansion<f64>;
pub type PredictiveSummary64 = PredictiveSummary<f64>;
pub type StudyConfig64 = StudyConfig<f64>;
pub type StudyReport64 = StudyReport<f64>;
pub type Params32 = Params<f32>;
pub type CensoredSample32 = CensoredSample<f32>;
