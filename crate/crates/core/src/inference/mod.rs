//! Gibbs-within-Metropolis posterior sampling for the latent Ising field,
//! its parameters, and the reporting layer.

mod chain;
mod config;
pub mod io;
mod kernels;
pub mod polya_gamma;
mod summary;

pub use chain::{
    chain_seed, run_chain, run_chains, AdaptationEvent, ChainSamples, FitData, PosteriorSamples,
    StateSamples,
};
pub use config::{BetaPrior, McmcConfig, ModelSpec, NormalPrior, PriorConfig, ScaleConvention};
pub use kernels::{
    log_exchange_ratio, report_counts, sample_heterogeneous_alphas, sample_homogeneous_alpha,
    sample_latent_states, svea_update, unreported_positive_probability, LogisticKernel, ShiftKernel,
    SveaKernel,
};
pub use summary::{
    node_posterior, split_rhat, summarize, summarize_draws, ChainDiagnostics, NodePosterior,
    ParamSummary, PosteriorSummary,
};
