//! Survival trees for left-truncated, right-censored data.
//!
//! Two algorithms share one data model: a conditional-inference tree driven by log-rank
//! scores ([`ltrcit`]) and a relative-risk tree fitted through the Poisson-deviance
//! equivalence ([`ltrcart`]). Time-varying covariates are handled by splitting each subject
//! into pseudo-subjects over which covariates are constant ([`data::make_pseudo_subjects`]).
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the crate root fix
//! the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimators;
pub mod evaluation;
mod float_serde;
pub mod ltrcart;
pub mod ltrcit;
pub mod scalar;
pub mod simulation;
pub mod stats;
pub mod tree;

pub use error::{DataError, EstimateError};
pub use scalar::Scalar;

pub type Dataset = data::Dataset<f64>;
pub type LtrcRecord = data::LtrcRecord<f64>;
pub type CovariateRow = data::CovariateRow<f64>;
pub type Span = data::Span<f64>;
pub type StepFunction = estimators::StepFunction<f64>;
pub type SurvivalCurve = estimators::SurvivalCurve<f64>;
pub type CumulativeHazard = estimators::CumulativeHazard<f64>;
pub type RiskSetTable = estimators::RiskSetTable<f64>;
pub type LtrcitModel = ltrcit::LtrcitModel<f64>;
pub type LtrcartModel = ltrcart::LtrcartModel<f64>;
pub type TruthPartition = evaluation::TruthPartition<f64>;
pub type PredictionSet = evaluation::PredictionSet<f64>;
