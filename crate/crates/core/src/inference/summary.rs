use serde::{Deserialize, Serialize};

use super::chain::{AdaptationEvent, PosteriorSamples};
use super::config::ModelSpec;
use crate::math::{mean, quantile_sorted, sample_variance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
    /// `None` with fewer than two chains.
    pub rhat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub seed: u64,
    pub retained: usize,
    pub burn_in_acceptance: f64,
    pub post_burn_in_acceptance: f64,
    pub final_step: f64,
    pub adaptation: Vec<AdaptationEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub model: ModelSpec,
    pub params: Vec<ParamSummary>,
    pub max_rhat: Option<f64>,
    /// Set when R-hat could not be computed.
    pub single_chain: bool,
    pub chains: Vec<ChainDiagnostics>,
}

/// Per-node posterior quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct NodePosterior {
    pub pr_a: Vec<f64>,
    pub psi: Vec<f64>,
    pub pr_t: Vec<f64>,
}

/// Split R-hat: each chain is halved and the potential scale reduction is
/// computed over the halves. Identical constant chains give exactly 1.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains.iter().map(Vec::len).min()? / 2;
    if chains.len() < 2 || n < 2 {
        return None;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let c = &c[c.len() - 2 * n..];
            [&c[..n], &c[n..]]
        })
        .collect();
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = mean(&halves.iter().map(|h| sample_variance(h)).collect::<Vec<_>>());
    let b = n as f64 * sample_variance(&means);
    if w == 0.0 {
        return Some(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Some((var_plus / w).sqrt())
}

pub fn summarize_draws(name: &str, chains: &[Vec<f64>]) -> ParamSummary {
    let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.to_string(),
        mean: mean(&all),
        median: quantile_sorted(&all, 0.5),
        lo95: quantile_sorted(&all, 0.025),
        hi95: quantile_sorted(&all, 0.975),
        rhat: split_rhat(chains),
    }
}

/// Parameter summaries and chain diagnostics.
pub fn summarize(samples: &PosteriorSamples) -> PosteriorSummary {
    let params: Vec<ParamSummary> = (0..samples.n_params())
        .map(|k| summarize_draws(&samples.labels[k], &samples.param_by_chain(k)))
        .collect();
    let max_rhat = params
        .iter()
        .filter_map(|p| p.rhat)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    PosteriorSummary {
        model: samples.spec,
        single_chain: samples.chains.len() < 2,
        max_rhat,
        params,
        chains: samples
            .chains
            .iter()
            .map(|c| ChainDiagnostics {
                chain: c.chain,
                seed: c.seed,
                retained: c.len(),
                burn_in_acceptance: c.burn_in_acceptance,
                post_burn_in_acceptance: c.post_burn_in_acceptance,
                final_step: c.final_step,
                adaptation: c.adaptation.clone(),
            })
            .collect(),
    }
}

pub fn node_posterior(samples: &PosteriorSamples) -> NodePosterior {
    NodePosterior {
        pr_a: samples.node_pr_a(),
        psi: samples.node_psi(),
        pr_t: samples.node_pr_t(),
    }
}
