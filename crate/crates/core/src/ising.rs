//! Ising prior over latent event states.
//!
//! The unnormalized log density is `theta0 * sum_i A_i + theta1 * sum_{i~j} A_i A_j`
//! with the pair sum taken once per undirected edge. This is the convention
//! under which the single-site conditional is `sigmoid(2 (theta0 + theta1 * sum_{j~i} A_j))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::SpatialGraph;
use crate::math::{logsumexp, sigmoid};
use crate::unionfind::UnionFind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    /// Incidence-rate location.
    pub theta0: f64,
    /// Spatial correlation strength, non-negative.
    pub theta1: f64,
}

impl IsingParams {
    pub fn new(theta0: f64, theta1: f64) -> Result<Self> {
        if theta1 < 0.0 || theta1.is_nan() {
            return Err(Error::NegativeCorrelation(theta1));
        }
        Ok(IsingParams { theta0, theta1 })
    }
}

/// Latent states in `{-1, +1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateVector(Vec<i8>);

impl StateVector {
    pub fn filled(n: usize, value: i8) -> Self {
        assert!(value == 1 || value == -1);
        StateVector(vec![value; n])
    }

    pub fn from_vec(values: Vec<i8>) -> Result<Self> {
        if let Some(bad) = values.iter().position(|&v| v != 1 && v != -1) {
            return Err(Error::parse(
                "state vector",
                format!("entry {bad} is {} (expected -1 or +1)", values[bad]),
            ));
        }
        Ok(StateVector(values))
    }

    /// Uniform random initialization.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        StateVector((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    /// State `k` of the `2^n` enumeration (bit `i` set means node `i` is +1).
    pub fn from_bits(n: usize, k: u64) -> Self {
        StateVector((0..n).map(|i| if (k >> i) & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    #[inline]
    pub fn is_positive(&self, i: usize) -> bool {
        self.0[i] > 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: i8) {
        debug_assert!(value == 1 || value == -1);
        self.0[i] = value;
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn count_positive(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0).count()
    }

    pub fn flipped(&self) -> Self {
        StateVector(self.0.iter().map(|v| -v).collect())
    }
}

/// `(sum_i A_i, sum_{i~j} A_i A_j)`.
pub fn sufficient_statistics(a: &StateVector, graph: &SpatialGraph) -> (f64, f64) {
    let s0: i64 = a.0.iter().map(|&v| v as i64).sum();
    let s1: i64 = graph
        .edges()
        .iter()
        .map(|e| (a.0[e.a] * a.0[e.b]) as i64)
        .sum();
    (s0 as f64, s1 as f64)
}

pub fn unnormalized_log_density(
    a: &StateVector,
    params: &IsingParams,
    graph: &SpatialGraph,
) -> Result<f64> {
    check_len("state vector", graph.len(), a.len())?;
    let (s0, s1) = sufficient_statistics(a, graph);
    Ok(params.theta0 * s0 + params.theta1 * s1)
}

pub const MAX_ENUMERATION_NODES: usize = 20;

/// `log Z(theta)` by enumerating all `2^N` states.
pub fn log_partition_bruteforce(params: &IsingParams, graph: &SpatialGraph) -> Result<f64> {
    let n = graph.len();
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::EnumerationTooLarge(n));
    }
    let terms: Vec<f64> = (0..1u64 << n)
        .map(|k| {
            let a = StateVector::from_bits(n, k);
            let (s0, s1) = sufficient_statistics(&a, graph);
            params.theta0 * s0 + params.theta1 * s1
        })
        .collect();
    Ok(logsumexp(&terms))
}

/// Probability of `A_i = +1` given the neighbor sum.
#[inline]
pub fn conditional_positive(params: &IsingParams, neighbor_sum: f64) -> f64 {
    sigmoid(2.0 * (params.theta0 + params.theta1 * neighbor_sum))
}

#[inline]
pub(crate) fn neighbor_sum(a: &StateVector, graph: &SpatialGraph, i: usize) -> i32 {
    graph.neighbors(i).iter().map(|&j| a.0[j] as i32).sum()
}

/// `Pr(A_i = +1 | A_{-i})`.
pub fn besag_conditional(
    i: usize,
    a: &StateVector,
    params: &IsingParams,
    graph: &SpatialGraph,
) -> Result<f64> {
    check_len("state vector", graph.len(), a.len())?;
    if i >= graph.len() {
        return Err(Error::IndexOutOfBounds {
            index: i,
            len: graph.len(),
        });
    }
    Ok(conditional_positive(params, neighbor_sum(a, graph, i) as f64))
}

/// Reusable Swendsen-Wang cluster sampler bound to one graph.
///
/// Each sweep activates bonds between equal-spin neighbors with probability
/// `1 - exp(-2 theta1)`, then assigns every cluster of size `s` the spin +1
/// with probability `sigmoid(2 theta0 s)`. This leaves the Ising law with
/// external field invariant.
#[derive(Clone, Debug)]
pub struct SwendsenWang {
    pairs: Vec<(u32, u32)>,
    uf: UnionFind,
    cluster_spin: Vec<i8>,
    small_up: [u64; 8],
}

impl SwendsenWang {
    pub fn new(graph: &SpatialGraph) -> Self {
        SwendsenWang {
            pairs: graph
                .edges()
                .iter()
                .map(|e| (e.a as u32, e.b as u32))
                .collect(),
            uf: UnionFind::new(graph.len()),
            cluster_spin: vec![0; graph.len()],
            small_up: [0; 8],
        }
    }

    /// One cluster update in place.
    pub fn sweep<R: Rng + ?Sized>(&mut self, state: &mut StateVector, params: &IsingParams, rng: &mut R) {
        let s = &mut state.0;
        debug_assert_eq!(s.len(), self.cluster_spin.len());
        self.uf.reset();
        let p_bond = -(-2.0 * params.theta1).exp_m1();
        // bond when a uniform u32 falls below p_bond * 2^32; the draw is made
        // for every edge so the loop has a single rarely-taken branch
        let threshold = (p_bond * 4_294_967_296.0) as u64;
        if threshold > 0 {
            for &(a, b) in &self.pairs {
                let (a, b) = (a as usize, b as usize);
                let u = rng.next_u32() as u64;
                if (s[a] == s[b]) & (u < threshold) {
                    self.uf.union(a, b);
                }
            }
        }
        let up_threshold =
            |size: usize| (sigmoid(2.0 * params.theta0 * size as f64) * 4_294_967_296.0) as u64;
        for (k, t) in self.small_up.iter_mut().enumerate() {
            *t = up_threshold(k + 1);
        }
        // a spin is drawn at every node; only the entries at roots are read
        for i in 0..s.len() {
            let size = if self.uf.is_root(i) { self.uf.root_size(i) } else { 1 };
            let thr = match self.small_up.get(size - 1) {
                Some(&t) => t,
                None => up_threshold(size),
            };
            self.cluster_spin[i] = if (rng.next_u32() as u64) < thr { 1 } else { -1 };
        }
        for i in 0..s.len() {
            let root = self.uf.find(i);
            s[i] = self.cluster_spin[root];
        }
    }

    pub fn run<R: Rng + ?Sized>(
        &mut self,
        state: &mut StateVector,
        params: &IsingParams,
        sweeps: usize,
        rng: &mut R,
    ) {
        for _ in 0..sweeps {
            self.sweep(state, params, rng);
        }
    }
}

/// Runs `sweeps` Swendsen-Wang updates from `init` and returns the final state.
pub fn swendsen_wang_sample<R: Rng + ?Sized>(
    params: &IsingParams,
    graph: &SpatialGraph,
    init: &StateVector,
    sweeps: usize,
    rng: &mut R,
) -> Result<StateVector> {
    if params.theta1 < 0.0 || params.theta1.is_nan() {
        return Err(Error::NegativeCorrelation(params.theta1));
    }
    if sweeps == 0 {
        return Err(Error::InvalidConfig("sweeps must be at least 1".into()));
    }
    check_len("initial state", graph.len(), init.len())?;
    let mut state = init.clone();
    SwendsenWang::new(graph).run(&mut state, params, sweeps, rng);
    Ok(state)
}

/// Burn-in used before collecting positive-fraction draws.
pub const FRACTION_BURN_IN: usize = 100;

/// Fractions of nodes with `A_i = +1` over successive Swendsen-Wang draws,
/// after [`FRACTION_BURN_IN`] sweeps from a random start.
pub fn positive_fraction_samples<R: Rng + ?Sized>(
    params: &IsingParams,
    graph: &SpatialGraph,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be at least 1".into()));
    }
    if params.theta1 < 0.0 {
        return Err(Error::NegativeCorrelation(params.theta1));
    }
    let n = graph.len() as f64;
    let mut state = StateVector::random(graph.len(), rng);
    let mut sw = SwendsenWang::new(graph);
    sw.run(&mut state, params, FRACTION_BURN_IN, rng);
    Ok((0..samples)
        .map(|_| {
            sw.sweep(&mut state, params, rng);
            state.count_positive() as f64 / n
        })
        .collect())
}

/// Monte-Carlo mean of the positive fraction under the Ising prior.
pub fn expected_positive_fraction<R: Rng + ?Sized>(
    params: &IsingParams,
    graph: &SpatialGraph,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let draws = positive_fraction_samples(params, graph, samples, rng)?;
    Ok(crate::math::mean(&draws))
}
