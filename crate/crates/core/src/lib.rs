//! Primary-auxiliary transmissibility model scheduling.
//!
//! Offline, one FIR transmissibility model per working condition is fitted
//! twice: a primary model from pseudo-inputs to the target output, and an
//! auxiliary model between the pseudo-inputs themselves. Online, only
//! pseudo-inputs are measured; a Bayes classifier over the auxiliary models
//! picks the condition in each window and the matching primary model
//! estimates the target.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
mod linalg;
pub mod regression;
pub mod scenario;
pub mod scheduler;
pub mod simulator;
pub mod transmissibility;

pub use dataset::{load_csv, Channel, ChannelRole, ChannelSpec, Decomposition, TimeSeriesSet};
pub use error::{Error, Result};
pub use evaluation::{fit_metric, ComparisonReport, FitScore};
pub use regression::{mle_fit, ridge_fit, RidgeSolution, DEFAULT_C_LIM};
pub use scheduler::{schedule_estimate, Prior, ScheduleTrace};
pub use transmissibility::{train_families, FirModel, ModelStore, TransmissibilityFamily};
