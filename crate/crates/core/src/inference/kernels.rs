//! The conditional updates cycled by each chain, plus a joint shift move.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::config::{ModelSpec, PriorConfig};
use super::polya_gamma::sample_pg1;
use crate::covariates::CovariateTable;
use crate::error::{check_len, Error, Result};
use crate::graph::SpatialGraph;
use crate::ising::{conditional_positive, neighbor_sum, sufficient_statistics, IsingParams, StateVector, SwendsenWang};
use crate::math::{logit, sigmoid};
use crate::observation::{linear_predictor, report_loglikelihood, ReportVector};

/// Log acceptance ratio of an exchange move from `current` to `proposed`,
/// given sufficient statistics of the latent field `s_a` and of the auxiliary
/// draw `s_w` (sampled at `proposed`). Partition functions cancel.
pub fn log_exchange_ratio(
    current: &IsingParams,
    proposed: &IsingParams,
    s_a: (f64, f64),
    s_w: (f64, f64),
    prior: &PriorConfig,
) -> f64 {
    let d0 = proposed.theta0 - current.theta0;
    let d1 = proposed.theta1 - current.theta1;
    d0 * (s_a.0 - s_w.0) + d1 * (s_a.1 - s_w.1)
        + prior.log_prior_theta(proposed.theta0, proposed.theta1)
        - prior.log_prior_theta(current.theta0, current.theta1)
}

/// Exchange-algorithm update of `(theta0, theta1)` with reusable buffers.
#[derive(Clone, Debug)]
pub struct SveaKernel {
    sw: SwendsenWang,
    aux: StateVector,
}

impl SveaKernel {
    pub fn new(graph: &SpatialGraph) -> Self {
        SveaKernel {
            sw: SwendsenWang::new(graph),
            aux: StateVector::filled(graph.len(), 1),
        }
    }

    /// Joint normal random-walk proposal; `theta1' < 0` is rejected outright.
    /// The auxiliary field runs `sw_burnin` sweeps at the proposal, started
    /// from `a`.
    #[allow(clippy::too_many_arguments)]
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        current: &IsingParams,
        a: &StateVector,
        graph: &SpatialGraph,
        prior: &PriorConfig,
        step: f64,
        sw_burnin: usize,
        rng: &mut R,
    ) -> (IsingParams, bool) {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        let proposed = IsingParams {
            theta0: current.theta0 + step * z0,
            theta1: current.theta1 + step * z1,
        };
        if proposed.theta1 < 0.0 {
            return (*current, false);
        }
        self.aux.clone_from(a);
        self.sw.run(&mut self.aux, &proposed, sw_burnin, rng);
        let s_a = sufficient_statistics(a, graph);
        let s_w = sufficient_statistics(&self.aux, graph);
        let log_r = log_exchange_ratio(current, &proposed, s_a, s_w, prior);
        let u: f64 = rng.random();
        if u.ln() < log_r {
            (proposed, true)
        } else {
            (*current, false)
        }
    }
}

/// One exchange update. Allocates sampler buffers; chains use [`SveaKernel`].
#[allow(clippy::too_many_arguments)]
pub fn svea_update<R: Rng + ?Sized>(
    current: &IsingParams,
    a: &StateVector,
    graph: &SpatialGraph,
    prior: &PriorConfig,
    step: f64,
    sw_burnin: usize,
    rng: &mut R,
) -> Result<(IsingParams, bool)> {
    check_len("state vector", graph.len(), a.len())?;
    if sw_burnin == 0 {
        return Err(Error::InvalidConfig("sw_burnin must be at least 1".into()));
    }
    Ok(SveaKernel::new(graph).update(current, a, graph, prior, step, sw_burnin, rng))
}

/// `Pr(A_i = +1 | A_{-i}, T_i = 0)` from the prior conditional `p`.
#[inline]
pub fn unreported_positive_probability(p: f64, psi: f64) -> f64 {
    let q = p * (1.0 - psi);
    q / (q + (1.0 - p))
}

/// One systematic-scan sweep over the latent field in place. Reported nodes
/// are clamped to +1.
pub fn sample_latent_states<R: Rng + ?Sized>(
    a: &mut StateVector,
    t: &ReportVector,
    params: &IsingParams,
    psi: &[f64],
    graph: &SpatialGraph,
    rng: &mut R,
) {
    for i in 0..a.len() {
        if t.get(i) {
            a.set(i, 1);
            continue;
        }
        let p = conditional_positive(params, neighbor_sum(a, graph, i) as f64);
        let prob = unreported_positive_probability(p, psi[i]);
        a.set(i, if rng.random::<f64>() < prob { 1 } else { -1 });
    }
}

/// `(#{A=+1, T=1}, #{A=+1, T=0})`, failing on a report at a negative node.
pub fn report_counts(a: &StateVector, t: &ReportVector) -> Result<(usize, usize)> {
    check_len("report vector", a.len(), t.len())?;
    if let Some(i) = t.first_false_positive(a) {
        return Err(Error::FalsePositive(i));
    }
    let mut n11 = 0;
    let mut n10 = 0;
    for i in 0..a.len() {
        if a.is_positive(i) {
            if t.get(i) {
                n11 += 1;
            } else {
                n10 += 1;
            }
        }
    }
    Ok((n11, n10))
}

/// Conjugate draw `alpha ~ Beta(a + n11, b + n10)`.
pub fn sample_homogeneous_alpha<R: Rng + ?Sized>(
    a: &StateVector,
    t: &ReportVector,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<f64> {
    let (n11, n10) = report_counts(a, t)?;
    let beta = Beta::new(prior.homo_alpha.a + n11 as f64, prior.homo_alpha.b + n10 as f64)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    // guard the open interval against underflow at extreme counts
    Ok(beta.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

/// Polya-Gamma data-augmentation Gibbs kernel for the Bayesian logistic
/// regression of reports on covariates over the positive nodes. Its
/// stationary law is the exact posterior under the normal priors.
#[derive(Clone, Debug)]
pub struct LogisticKernel {
    d: usize,
    rows: Vec<usize>,
    prior_mean: DVector<f64>,
    prior_prec: DVector<f64>,
}

impl LogisticKernel {
    pub fn new(n_features: usize, prior: &PriorConfig) -> Self {
        let d = n_features + 1;
        let prior_mean = DVector::from_fn(d, |l, _| prior.alpha_prior(l).mean);
        let prior_prec = DVector::from_fn(d, |l, _| prior.sd(prior.alpha_prior(l)).powi(-2));
        LogisticKernel {
            d,
            rows: Vec::new(),
            prior_mean,
            prior_prec,
        }
    }

    /// Runs `steps` Gibbs updates from `alphas = [alpha0, coeffs..]` in place.
    /// With no positive node the coefficients are redrawn from the prior.
    #[allow(clippy::too_many_arguments)]
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        alphas: &mut [f64],
        a: &StateVector,
        t: &ReportVector,
        covariates: &CovariateTable,
        steps: usize,
        rng: &mut R,
    ) {
        let d = self.d;
        debug_assert_eq!(alphas.len(), d);
        self.rows.clear();
        self.rows.extend((0..a.len()).filter(|&i| a.is_positive(i)));
        if self.rows.is_empty() {
            log::debug!("no positive nodes; reporting coefficients drawn from the prior");
            for (l, v) in alphas.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                *v = self.prior_mean[l] + z / self.prior_prec[l].sqrt();
            }
            return;
        }
        let mut prec = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        let mut x = vec![0.0; d];
        x[0] = 1.0;
        for _ in 0..steps {
            prec.fill(0.0);
            for l in 0..d {
                prec[(l, l)] = self.prior_prec[l];
                rhs[l] = self.prior_prec[l] * self.prior_mean[l];
            }
            for &i in &self.rows {
                x[1..].copy_from_slice(covariates.row(i));
                let eta = linear_predictor(alphas[0], &alphas[1..], covariates.row(i));
                let omega = sample_pg1(eta, rng);
                let kappa = if t.get(i) { 0.5 } else { -0.5 };
                for r in 0..d {
                    rhs[r] += kappa * x[r];
                    let wr = omega * x[r];
                    for c in 0..=r {
                        prec[(r, c)] += wr * x[c];
                    }
                }
            }
            for r in 0..d {
                for c in 0..r {
                    prec[(c, r)] = prec[(r, c)];
                }
            }
            let chol = prec
                .clone()
                .cholesky()
                .expect("prior precision keeps the system positive definite");
            let mean = chol.solve(&rhs);
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
            let noise = chol
                .l()
                .tr_solve_lower_triangular(&z)
                .expect("cholesky factor is nonsingular");
            for l in 0..d {
                alphas[l] = mean[l] + noise[l];
            }
        }
    }
}

/// Heterogeneous reporting update: `inner_steps` kernel iterations warm
/// started at `current = [alpha0, coeffs..]`.
#[allow(clippy::too_many_arguments)]
pub fn sample_heterogeneous_alphas<R: Rng + ?Sized>(
    a: &StateVector,
    t: &ReportVector,
    covariates: &CovariateTable,
    current: &[f64],
    prior: &PriorConfig,
    inner_steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_len("report vector", a.len(), t.len())?;
    check_len("covariate rows", a.len(), covariates.n_nodes())?;
    check_len("reporting coefficients", covariates.n_features() + 1, current.len())?;
    if let Some(i) = t.first_false_positive(a) {
        return Err(Error::FalsePositive(i));
    }
    let mut alphas = current.to_vec();
    LogisticKernel::new(covariates.n_features(), prior).run(&mut alphas, a, t, covariates, inner_steps, rng);
    Ok(alphas)
}

/// Joint Metropolis move along the direction where more positive nodes are
/// offset by a lower reporting intercept.
///
/// A draw `delta ~ N(0, step^2)` shifts `theta0` by `delta` and the reporting
/// intercept (`alpha0`, or `logit(alpha)` for homogeneous reporting) by
/// `-intercept_slope * delta`. When `delta > 0` each unreported negative node
/// turns positive independently with probability
/// `min(1, q (2 + slope psi) |delta|)`, where `q` is its current conditional
/// probability of being positive; when `delta < 0` unreported positives turn
/// negative with `1 - q` in place of `q`. The reverse proposal is evaluated at
/// the proposed state. The partition function ratio is cancelled by an
/// auxiliary field drawn at the proposal and carried back to the current
/// parameters through `bridge` intermediate Swendsen-Wang sweeps; the field
/// statistic averaged along that path replaces the single auxiliary draw of
/// the plain exchange update, which cuts the noise of the ratio.
#[derive(Clone, Debug)]
pub struct ShiftKernel {
    sw: SwendsenWang,
    aux: StateVector,
    proposal: StateVector,
    rep: Vec<f64>,
    psi: Vec<f64>,
    pub intercept_slope: f64,
}

fn log_prior_reporting(spec: ModelSpec, rep: &[f64], prior: &PriorConfig) -> f64 {
    match spec {
        ModelSpec::Homogeneous => {
            let a = rep[0];
            (prior.homo_alpha.a - 1.0) * a.ln() + (prior.homo_alpha.b - 1.0) * (1.0 - a).ln()
        }
        ModelSpec::Heterogeneous => prior.log_prior_alphas(rep),
    }
}

fn fill_rates(spec: ModelSpec, rep: &[f64], covariates: &CovariateTable, psi: &mut [f64]) {
    match spec {
        ModelSpec::Homogeneous => psi.fill(rep[0]),
        ModelSpec::Heterogeneous => {
            for (i, p) in psi.iter_mut().enumerate() {
                *p = sigmoid(linear_predictor(rep[0], &rep[1..], covariates.row(i)));
            }
        }
    }
}

/// Flip probability of unreported node `i` for a move of size `size` in the
/// direction `up`, evaluated at `(a, theta, psi)`.
#[allow(clippy::too_many_arguments)]
fn flip_probability(
    i: usize,
    a: &StateVector,
    graph: &SpatialGraph,
    theta: &IsingParams,
    psi: f64,
    slope: f64,
    size: f64,
    up: bool,
) -> f64 {
    let q = unreported_positive_probability(conditional_positive(theta, neighbor_sum(a, graph, i) as f64), psi);
    let side = if up { q } else { 1.0 - q };
    (side * (2.0 + slope * psi) * size).min(1.0)
}

impl ShiftKernel {
    pub fn new(graph: &SpatialGraph) -> Self {
        ShiftKernel {
            sw: SwendsenWang::new(graph),
            aux: StateVector::filled(graph.len(), 1),
            proposal: StateVector::filled(graph.len(), 1),
            rep: Vec::new(),
            psi: vec![0.0; graph.len()],
            intercept_slope: 0.0,
        }
    }

    /// Sets the intercept slope that keeps the expected number of reports
    /// fixed when the unreported positives change as the move expects.
    pub fn tune(&mut self, a: &StateVector, t: &ReportVector, psi: &[f64]) {
        let n = a.len();
        let positive: Vec<usize> = (0..n).filter(|&i| a.is_positive(i)).collect();
        let unreported = (0..n).filter(|&i| !t.get(i)).count();
        let unreported_pos = positive.iter().filter(|&&i| !t.get(i)).count();
        let q = (unreported_pos as f64 + 0.5) / (unreported as f64 + 1.0);
        let gained = 2.0 * unreported as f64 * q * (1.0 - q);
        let mean_psi = if positive.is_empty() {
            0.5
        } else {
            positive.iter().map(|&i| psi[i]).sum::<f64>() / positive.len() as f64
        };
        self.intercept_slope = gained / ((positive.len().max(1) as f64) * (1.0 - mean_psi).max(0.05));
    }

    /// One move in place; returns whether it was accepted. `psi` must hold
    /// the rates of `rep` and is updated on acceptance.
    #[allow(clippy::too_many_arguments)]
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        theta: &mut IsingParams,
        rep: &mut [f64],
        psi: &mut [f64],
        a: &mut StateVector,
        spec: ModelSpec,
        data: (&SpatialGraph, &ReportVector, &CovariateTable),
        prior: &PriorConfig,
        step: f64,
        sw_burnin: usize,
        bridge: usize,
        rng: &mut R,
    ) -> bool {
        let (graph, t, covariates) = data;
        let z: f64 = StandardNormal.sample(rng);
        let delta = step * z;
        let size = delta.abs();
        let up = delta > 0.0;
        let slope = self.intercept_slope;

        let shift = -slope * delta;
        self.rep.clear();
        self.rep.extend_from_slice(rep);
        let log_jacobian = match spec {
            ModelSpec::Homogeneous => {
                let old = rep[0];
                let new = sigmoid(logit(old) + shift);
                if !(new > 0.0 && new < 1.0) {
                    return false;
                }
                self.rep[0] = new;
                (new * (1.0 - new)).ln() - (old * (1.0 - old)).ln()
            }
            ModelSpec::Heterogeneous => {
                self.rep[0] += shift;
                0.0
            }
        };
        let proposed = IsingParams {
            theta0: theta.theta0 + delta,
            theta1: theta.theta1,
        };
        fill_rates(spec, &self.rep, covariates, &mut self.psi);

        // forward flips, all probabilities taken at the current state
        self.proposal.clone_from(a);
        let mut log_q = 0.0;
        for i in 0..a.len() {
            if t.get(i) || a.is_positive(i) == up {
                continue;
            }
            let r = flip_probability(i, a, graph, theta, psi[i], slope, size, up);
            if rng.random::<f64>() < r {
                self.proposal.set(i, if up { 1 } else { -1 });
                log_q -= r.ln();
            } else {
                log_q -= (1.0 - r).ln();
            }
        }
        // reverse flips from the proposal, in the opposite direction
        for i in 0..a.len() {
            if t.get(i) || self.proposal.is_positive(i) != up {
                continue;
            }
            let r = flip_probability(i, &self.proposal, graph, &proposed, self.psi[i], slope, size, !up);
            log_q += if a.is_positive(i) != self.proposal.is_positive(i) {
                r.ln()
            } else {
                (1.0 - r).ln()
            };
        }
        if !log_q.is_finite() {
            return false;
        }

        self.aux.clone_from(&self.proposal);
        self.sw.run(&mut self.aux, &proposed, sw_burnin, rng);
        let mut w0 = self.aux.values().iter().map(|&v| v as f64).sum::<f64>();
        for k in 1..=bridge {
            let beta = k as f64 / (bridge + 1) as f64;
            let mid = IsingParams {
                theta0: proposed.theta0 + beta * (theta.theta0 - proposed.theta0),
                theta1: theta.theta1,
            };
            self.sw.sweep(&mut self.aux, &mid, rng);
            w0 += self.aux.values().iter().map(|&v| v as f64).sum::<f64>();
        }
        w0 /= (bridge + 1) as f64;
        let (s0, s1) = sufficient_statistics(a, graph);
        let (p0, p1) = sufficient_statistics(&self.proposal, graph);
        let log_field = proposed.theta0 * p0 + theta.theta1 * p1 - theta.theta0 * s0 - theta.theta1 * s1
            + (theta.theta0 - proposed.theta0) * w0;
        let (Ok(ll_new), Ok(ll_old)) = (
            report_loglikelihood(t, &self.proposal, &self.psi),
            report_loglikelihood(t, a, psi),
        ) else {
            return false;
        };
        let log_r = log_field
            + prior.log_prior_theta(proposed.theta0, proposed.theta1)
            - prior.log_prior_theta(theta.theta0, theta.theta1)
            + ll_new
            - ll_old
            + log_prior_reporting(spec, &self.rep, prior)
            - log_prior_reporting(spec, rep, prior)
            + log_jacobian
            + log_q;
        if rng.random::<f64>().ln() < log_r {
            *theta = proposed;
            rep.copy_from_slice(&self.rep);
            psi.copy_from_slice(&self.psi);
            a.clone_from(&self.proposal);
            true
        } else {
            false
        }
    }
}
