use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{McmcConfig, ModelSpec, PriorConfig};
use super::kernels::{
    sample_homogeneous_alpha, sample_latent_states, unreported_positive_probability, LogisticKernel, ShiftKernel,
    SveaKernel,
};
use crate::covariates::CovariateTable;
use crate::error::{check_len, Error, Result};
use crate::graph::SpatialGraph;
use crate::ising::{conditional_positive, neighbor_sum, IsingParams, StateVector};
use crate::math::quantile_sorted;
use crate::observation::{linear_predictor, ReportVector, ReportingParams};
use crate::rng::{derive_seed, SimRng};

/// Immutable inputs of a fit.
#[derive(Clone, Copy, Debug)]
pub struct FitData<'a> {
    pub graph: &'a SpatialGraph,
    pub covariates: &'a CovariateTable,
    /// Training reports.
    pub reports: &'a ReportVector,
}

impl FitData<'_> {
    pub fn validate(&self, spec: ModelSpec) -> Result<()> {
        let n = self.graph.len();
        check_len("training reports", n, self.reports.len())?;
        if spec == ModelSpec::Heterogeneous {
            check_len("covariate rows", n, self.covariates.n_nodes())?;
        }
        Ok(())
    }
}

/// Packed latent-state draws, one bit per node (set means `A_i = +1`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateSamples {
    pub n_nodes: usize,
    words: Vec<u64>,
}

impl StateSamples {
    pub fn new(n_nodes: usize) -> Self {
        StateSamples {
            n_nodes,
            words: Vec::new(),
        }
    }

    pub fn words_per_sample(&self) -> usize {
        self.n_nodes.div_ceil(64)
    }

    pub fn len(&self) -> usize {
        match self.words_per_sample() {
            0 => 0,
            w => self.words.len() / w,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn push(&mut self, a: &StateVector) {
        let start = self.words.len();
        self.words.resize(start + self.words_per_sample(), 0);
        for i in 0..a.len() {
            if a.is_positive(i) {
                self.words[start + i / 64] |= 1 << (i % 64);
            }
        }
    }

    #[inline]
    pub fn is_positive(&self, sample: usize, node: usize) -> bool {
        let w = self.words[sample * self.words_per_sample() + node / 64];
        (w >> (node % 64)) & 1 == 1
    }

    pub fn state(&self, sample: usize) -> StateVector {
        let v = (0..self.n_nodes)
            .map(|i| if self.is_positive(sample, i) { 1 } else { -1 })
            .collect();
        StateVector::from_vec(v).expect("bits map to +-1")
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn from_words(n_nodes: usize, words: Vec<u64>) -> Result<Self> {
        let s = StateSamples { n_nodes, words };
        let w = s.words_per_sample();
        if w == 0 || s.words.len() % w != 0 {
            return Err(Error::parse("state samples", "word count is not a multiple of the row width"));
        }
        Ok(s)
    }
}

/// One proposal-step adaptation during burn-in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationEvent {
    /// Iteration (0-based) closing the window.
    pub iteration: usize,
    pub acceptance_rate: f64,
    pub step_before: f64,
    pub step_after: f64,
}

/// Retained draws of one chain.
#[derive(Clone, Debug)]
pub struct ChainSamples {
    pub chain: usize,
    pub seed: u64,
    pub iterations: Vec<usize>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    /// `[alpha]` or `[alpha0, coeffs..]` per retained draw.
    pub reporting: Vec<Vec<f64>>,
    /// Empty unless states were stored.
    pub states: StateSamples,
    /// Per-node count of retained draws with `A_i = +1`.
    pub positive_counts: Vec<u64>,
    /// Per-node sum of `psi_i` over retained draws.
    pub psi_sum: Vec<f64>,
    /// Per-node sums of the full conditional `Pr(A_i = +1 | rest)` and of
    /// its product with `psi_i` over retained draws.
    pub conditional_sum: Vec<f64>,
    pub conditional_pt_sum: Vec<f64>,
    pub burn_in_acceptance: f64,
    pub post_burn_in_acceptance: f64,
    /// Post-burn-in acceptance rate of the shift move (0 when disabled).
    pub shift_acceptance: f64,
    pub adaptation: Vec<AdaptationEvent>,
    /// Proposal step in force after burn-in.
    pub final_step: f64,
    pub final_shift_step: f64,
}

impl ChainSamples {
    pub fn len(&self) -> usize {
        self.theta0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta0.is_empty()
    }

    /// Draws of parameter `k` in label order (theta0, theta1, reporting..).
    pub fn param(&self, k: usize) -> Vec<f64> {
        match k {
            0 => self.theta0.clone(),
            1 => self.theta1.clone(),
            _ => self.reporting.iter().map(|r| r[k - 2]).collect(),
        }
    }
}

fn fill_psi(spec: ModelSpec, values: &[f64], covariates: &CovariateTable, psi: &mut [f64]) {
    match spec {
        ModelSpec::Homogeneous => psi.fill(values[0]),
        ModelSpec::Heterogeneous => {
            for (i, p) in psi.iter_mut().enumerate() {
                *p = crate::math::sigmoid(linear_predictor(values[0], &values[1..], covariates.row(i)));
            }
        }
    }
}

/// Runs one chain: exchange update of theta, a latent sweep, the reporting
/// update, then optionally the joint shift move, per iteration. Proposal
/// steps and shift tuning adapt only during burn-in.
pub fn run_chain(
    data: FitData<'_>,
    spec: ModelSpec,
    prior: &PriorConfig,
    config: &McmcConfig,
    chain: usize,
    chain_seed: u64,
) -> Result<ChainSamples> {
    config.validate()?;
    prior.validate()?;
    data.validate(spec)?;
    let graph = data.graph;
    let t = data.reports;
    let n = graph.len();
    let m = match spec {
        ModelSpec::Homogeneous => 0,
        ModelSpec::Heterogeneous => data.covariates.n_features(),
    };
    let mut rng = SimRng::seed_from_u64(chain_seed);

    let mut theta: IsingParams = prior.sample_ising(&mut rng);
    let mut a = StateVector::random(n, &mut rng);
    for i in 0..n {
        if t.get(i) {
            a.set(i, 1);
        }
    }
    let mut rep: Vec<f64> = prior.sample_reporting(spec, m, &mut rng).values();
    let mut psi = vec![0.0; n];
    fill_psi(spec, &rep, data.covariates, &mut psi);

    let mut svea = SveaKernel::new(graph);
    let mut shift = ShiftKernel::new(graph);
    shift.tune(&a, t, &psi);
    let mut shift_step = config.proposal_step;
    let mut shift_window = 0usize;
    let mut shift_accepts = 0usize;
    let mut logistic = LogisticKernel::new(m, prior);
    let stride = config.thin_stride();
    let retained = config.retained_per_chain();
    let mut out = ChainSamples {
        chain,
        seed: chain_seed,
        iterations: Vec::with_capacity(retained),
        theta0: Vec::with_capacity(retained),
        theta1: Vec::with_capacity(retained),
        reporting: Vec::with_capacity(retained),
        states: StateSamples::new(n),
        positive_counts: vec![0; n],
        psi_sum: vec![0.0; n],
        conditional_sum: vec![0.0; n],
        conditional_pt_sum: vec![0.0; n],
        burn_in_acceptance: 0.0,
        post_burn_in_acceptance: 0.0,
        shift_acceptance: 0.0,
        adaptation: Vec::new(),
        final_step: config.proposal_step,
        final_shift_step: config.proposal_step,
    };

    let mut step = config.proposal_step;
    let (lo, hi) = config.accept_band;
    let mut window_accepts = 0usize;
    let mut burn_accepts = 0usize;
    let mut post_accepts = 0usize;
    for it in 0..config.total_iterations {
        let (next, accepted) = svea.update(&theta, &a, graph, prior, step, config.sw_burnin, &mut rng);
        theta = next;
        sample_latent_states(&mut a, t, &theta, &psi, graph, &mut rng);
        match spec {
            ModelSpec::Homogeneous => rep[0] = sample_homogeneous_alpha(&a, t, prior, &mut rng)?,
            ModelSpec::Heterogeneous => logistic.run(
                &mut rep,
                &a,
                t,
                data.covariates,
                config.inner_logistic_steps,
                &mut rng,
            ),
        }
        fill_psi(spec, &rep, data.covariates, &mut psi);
        let shifted = config.shift_move
            && shift.update(
                &mut theta,
                &mut rep,
                &mut psi,
                &mut a,
                spec,
                (graph, t, data.covariates),
                prior,
                shift_step,
                config.sw_burnin,
                config.shift_bridge,
                &mut rng,
            );

        if it < config.burn_in {
            shift_window += shifted as usize;
            burn_accepts += accepted as usize;
            window_accepts += accepted as usize;
            if (it + 1) % config.adapt_interval == 0 {
                let rate = window_accepts as f64 / config.adapt_interval as f64;
                let before = step;
                if rate < lo {
                    step *= 1.0 - config.adapt_factor;
                } else if rate > hi {
                    step *= 1.0 + config.adapt_factor;
                }
                out.adaptation.push(AdaptationEvent {
                    iteration: it,
                    acceptance_rate: rate,
                    step_before: before,
                    step_after: step,
                });
                window_accepts = 0;
                if config.shift_move {
                    let rate = shift_window as f64 / config.adapt_interval as f64;
                    if rate < lo {
                        shift_step *= 1.0 - config.adapt_factor;
                    } else if rate > hi {
                        shift_step *= 1.0 + config.adapt_factor;
                    }
                    shift.tune(&a, t, &psi);
                }
                shift_window = 0;
            }
            continue;
        }
        post_accepts += accepted as usize;
        shift_accepts += shifted as usize;
        if (it - config.burn_in) % stride != 0 {
            continue;
        }
        out.iterations.push(it);
        out.theta0.push(theta.theta0);
        out.theta1.push(theta.theta1);
        out.reporting.push(rep.clone());
        if config.store_states {
            out.states.push(&a);
        }
        for i in 0..n {
            out.psi_sum[i] += psi[i];
            if a.is_positive(i) {
                out.positive_counts[i] += 1;
            }
            let c = if t.get(i) {
                1.0
            } else {
                let nb = f64::from(neighbor_sum(&a, graph, i));
                unreported_positive_probability(conditional_positive(&theta, nb), psi[i])
            };
            out.conditional_sum[i] += c;
            out.conditional_pt_sum[i] += c * psi[i];
        }
    }
    out.final_step = step;
    out.final_shift_step = shift_step;
    if config.burn_in > 0 {
        out.burn_in_acceptance = burn_accepts as f64 / config.burn_in as f64;
    }
    let post = (config.total_iterations - config.burn_in) as f64;
    out.post_burn_in_acceptance = post_accepts as f64 / post;
    out.shift_acceptance = shift_accepts as f64 / post;
    Ok(out)
}

/// Seed of chain `k` under master seed `seed`.
pub fn chain_seed(seed: u64, chain: usize) -> u64 {
    derive_seed(seed, &[chain as u64])
}

/// All chains of a fit.
#[derive(Clone, Debug)]
pub struct PosteriorSamples {
    pub spec: ModelSpec,
    /// Parameter labels: theta0, theta1, then reporting parameters.
    pub labels: Vec<String>,
    pub chains: Vec<ChainSamples>,
    pub n_nodes: usize,
}

/// Runs `config.chains` independent chains with seeds derived from
/// `config.seed`. Output does not depend on `config.parallel`.
pub fn run_chains(
    data: FitData<'_>,
    spec: ModelSpec,
    prior: &PriorConfig,
    config: &McmcConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let run = |k: usize| run_chain(data, spec, prior, config, k, chain_seed(config.seed, k));
    let chains: Vec<ChainSamples> = if config.parallel {
        (0..config.chains).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..config.chains).map(run).collect::<Result<_>>()?
    };
    let template = match spec {
        ModelSpec::Homogeneous => ReportingParams::Homogeneous { alpha: 0.5 },
        ModelSpec::Heterogeneous => ReportingParams::Heterogeneous {
            alpha0: 0.0,
            coeffs: vec![0.0; data.covariates.n_features()],
        },
    };
    let mut labels = vec!["theta0".to_string(), "theta1".to_string()];
    labels.extend(template.labels(&data.covariates.feature_names));
    Ok(PosteriorSamples {
        spec,
        labels,
        chains,
        n_nodes: data.graph.len(),
    })
}

impl PosteriorSamples {
    pub fn n_params(&self) -> usize {
        self.labels.len()
    }

    pub fn param_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Draws of parameter `k`, one vector per chain.
    pub fn param_by_chain(&self, k: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.param(k)).collect()
    }

    /// Draws of parameter `k` pooled over chains.
    pub fn param(&self, k: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.param(k)).collect()
    }

    pub fn mean(&self, k: usize) -> f64 {
        crate::math::mean(&self.param(k))
    }

    /// Central interval holding `level` of the pooled draws.
    pub fn interval(&self, k: usize, level: f64) -> (f64, f64) {
        let mut d = self.param(k);
        d.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - level);
        (quantile_sorted(&d, tail), quantile_sorted(&d, 1.0 - tail))
    }

    fn retained(&self) -> f64 {
        self.chains.iter().map(ChainSamples::len).sum::<usize>() as f64
    }

    fn node_mean(&self, field: impl Fn(&ChainSamples) -> &[f64]) -> Vec<f64> {
        let total = self.retained();
        (0..self.n_nodes)
            .map(|i| self.chains.iter().map(|c| field(c)[i]).sum::<f64>() / total)
            .collect()
    }

    /// Posterior `Pr(A_i = +1)`, averaging the full conditional over
    /// retained draws.
    pub fn node_pr_a(&self) -> Vec<f64> {
        self.node_mean(|c| &c.conditional_sum)
    }

    /// Fraction of retained draws with `A_i = +1`.
    pub fn node_positive_frequency(&self) -> Vec<f64> {
        let total = self.retained();
        (0..self.n_nodes)
            .map(|i| self.chains.iter().map(|c| c.positive_counts[i]).sum::<u64>() as f64 / total)
            .collect()
    }

    /// Posterior mean of `psi_i`.
    pub fn node_psi(&self) -> Vec<f64> {
        self.node_mean(|c| &c.psi_sum)
    }

    /// Posterior mean of `[A_i = +1] psi_i`, the probability of a report.
    pub fn node_pr_t(&self) -> Vec<f64> {
        self.node_mean(|c| &c.conditional_pt_sum)
    }

    /// Checks that every stored state has `A_i = +1` at reported nodes and
    /// that every retained theta1 is non-negative.
    pub fn check_invariants(&self, reports: &ReportVector) -> Result<()> {
        check_len("training reports", self.n_nodes, reports.len())?;
        let reported: Vec<usize> = (0..reports.len()).filter(|&i| reports.get(i)).collect();
        for c in &self.chains {
            if let Some(bad) = c.theta1.iter().find(|&&v| v < 0.0) {
                return Err(Error::NegativeCorrelation(*bad));
            }
            for &i in &reported {
                if c.positive_counts[i] != c.len() as u64 {
                    return Err(Error::FalsePositive(i));
                }
                for s in 0..c.states.len() {
                    if !c.states.is_positive(s, i) {
                        return Err(Error::FalsePositive(i));
                    }
                }
            }
            if self.spec == ModelSpec::Homogeneous
                && c.reporting.iter().any(|r| !(r[0] > 0.0 && r[0] < 1.0))
            {
                return Err(Error::DegenerateSamples("homogeneous alpha left (0, 1)".into()));
            }
        }
        Ok(())
    }
}
