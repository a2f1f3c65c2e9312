//! Inference of under-reported spatial events from positive-only reports.
//!
//! Latent event states follow an Ising field on a spatial graph; each true
//! event is reported with a node-specific probability. Posterior sampling
//! combines an exchange-algorithm update for the field parameters with
//! Gibbs updates for latent states and reporting parameters.

// `!(x > 0.0)` is the NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod covariates;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod inference;
pub mod ising;
pub mod math;
pub mod observation;
pub mod pooling;
pub mod rng;
pub mod synthetic;
mod unionfind;

pub use covariates::{CovariateTable, RawCovariates};
pub use error::{Error, Result};
pub use graph::SpatialGraph;
pub use inference::{McmcConfig, ModelSpec, PosteriorSamples, PriorConfig};
pub use ising::{IsingParams, StateVector};
pub use observation::{ReportVector, ReportingParams};
