//! Full Gibbs samplers on six-node graphs against posterior moments computed
//! by enumerating all latent states and integrating parameters on grids.

use underreport::inference::{run_chains, FitData};
use underreport::ising::{log_partition_bruteforce, unnormalized_log_density};
use underreport::math::{normal_log_pdf, sigmoid};
use underreport::observation::ReportVector;
use underreport::{CovariateTable, IsingParams, McmcConfig, ModelSpec, PriorConfig, SpatialGraph, StateVector};

/// Trapezoid nodes and weights on `[lo, hi]`.
fn trapezoid(lo: f64, hi: f64, points: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|k| {
            let w = if k == 0 || k == points - 1 { 0.5 * h } else { h };
            (lo + k as f64 * h, w)
        })
        .collect()
}

struct Exact {
    theta0: f64,
    theta1: f64,
    alphas: Vec<f64>,
    pr_a: Vec<f64>,
}

/// `alpha_part(a)` returns `(H, [H * alpha_k])` with `H` the prior-weighted
/// integral of the report likelihood over reporting parameters.
fn exact_posterior(
    g: &SpatialGraph,
    t: &ReportVector,
    prior: &PriorConfig,
    alpha_part: impl Fn(&StateVector) -> (f64, Vec<f64>),
) -> Exact {
    let n = g.len();
    let states: Vec<StateVector> = (0..1u64 << n)
        .map(|k| StateVector::from_bits(n, k))
        .filter(|a| (0..n).all(|i| !t.get(i) || a.is_positive(i)))
        .collect();
    let theta0_grid = trapezoid(-3.0, 3.0, 241);
    let theta1_grid = trapezoid(0.0, 0.35, 141);
    // (G, G * theta0, G * theta1) per state
    let mut g_part = vec![(0.0, 0.0, 0.0); states.len()];
    for &(t0, w0) in &theta0_grid {
        for &(t1, w1) in &theta1_grid {
            let p = IsingParams::new(t0, t1).unwrap();
            let log_z = log_partition_bruteforce(&p, g).unwrap();
            let prior_w = w0 * w1 * (normal_log_pdf(t0, 0.0, prior.theta0.scale)
                + normal_log_pdf(t1, prior.theta1.mean, prior.theta1.scale))
            .exp();
            for (s, a) in states.iter().enumerate() {
                let v = prior_w * (unnormalized_log_density(a, &p, g).unwrap() - log_z).exp();
                g_part[s].0 += v;
                g_part[s].1 += v * t0;
                g_part[s].2 += v * t1;
            }
        }
    }
    let h_part: Vec<(f64, Vec<f64>)> = states.iter().map(&alpha_part).collect();
    let k = h_part[0].1.len();
    let (mut z, mut m0, mut m1) = (0.0, 0.0, 0.0);
    let mut ma = vec![0.0; k];
    let mut pr_a = vec![0.0; n];
    for (s, a) in states.iter().enumerate() {
        let w = g_part[s].0 * h_part[s].0;
        z += w;
        m0 += g_part[s].1 * h_part[s].0;
        m1 += g_part[s].2 * h_part[s].0;
        for (m, h) in ma.iter_mut().zip(&h_part[s].1) {
            *m += g_part[s].0 * h;
        }
        for (i, p) in pr_a.iter_mut().enumerate() {
            if a.is_positive(i) {
                *p += w;
            }
        }
    }
    Exact {
        theta0: m0 / z,
        theta1: m1 / z,
        alphas: ma.iter().map(|m| m / z).collect(),
        pr_a: pr_a.iter().map(|p| p / z).collect(),
    }
}

fn short_config(seed: u64) -> McmcConfig {
    McmcConfig {
        chains: 4,
        total_iterations: 100_000,
        burn_in: 5_000,
        sw_burnin: 20,
        inner_logistic_steps: 1,
        seed,
        store_states: false,
        ..Default::default()
    }
}

fn compare(label: &str, got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() < tol, "{label}: sampler {got:.5}, exact {want:.5}");
}

#[test]
fn homogeneous_gibbs_matches_enumeration() {
    let g = SpatialGraph::lattice(2, 3);
    let t = ReportVector::from_indices(6, &[0, 4]).unwrap();
    let prior = PriorConfig::default();
    let (a, b) = (prior.homo_alpha.a, prior.homo_alpha.b);
    let ln_beta = |x: f64, y: f64| libm::lgamma(x) + libm::lgamma(y) - libm::lgamma(x + y);
    let exact = exact_posterior(&g, &t, &prior, |state| {
        let r = t.count() as f64;
        let m = (0..6).filter(|&i| state.is_positive(i) && !t.get(i)).count() as f64;
        let h = (ln_beta(a + r, b + m) - ln_beta(a, b)).exp();
        (h, vec![h * (a + r) / (a + b + r + m)])
    });

    let cov = CovariateTable::empty(6);
    let data = FitData {
        graph: &g,
        covariates: &cov,
        reports: &t,
    };
    let post = run_chains(data, ModelSpec::Homogeneous, &prior, &short_config(21)).unwrap();
    compare("theta0", post.mean(post.param_index("theta0").unwrap()), exact.theta0, 0.03);
    compare("theta1", post.mean(post.param_index("theta1").unwrap()), exact.theta1, 0.003);
    compare("alpha", post.mean(post.param_index("alpha").unwrap()), exact.alphas[0], 0.015);
    for (i, (got, want)) in post.node_pr_a().iter().zip(&exact.pr_a).enumerate() {
        compare(&format!("Pr(A_{i})"), *got, *want, 0.015);
    }
}

#[test]
fn heterogeneous_gibbs_matches_enumeration() {
    let g = SpatialGraph::lattice(2, 3);
    let t = ReportVector::from_indices(6, &[1, 5]).unwrap();
    let x = [-1.3, -0.6, 0.1, 0.4, 0.9, 1.5];
    let cov = CovariateTable::from_standardized(vec!["x".into()], &x.map(|v| vec![v])).unwrap();
    let prior = PriorConfig::default();
    let a0_grid = trapezoid(-6.0, 6.0, 241);
    let a1_grid = trapezoid(-3.0, 3.0, 121);
    let exact = exact_posterior(&g, &t, &prior, |state| {
        let (mut h, mut h0, mut h1) = (0.0, 0.0, 0.0);
        for &(a0, w0) in &a0_grid {
            for &(a1, w1) in &a1_grid {
                let mut log_l = normal_log_pdf(a0, prior.alpha0.mean, prior.alpha0.scale)
                    + normal_log_pdf(a1, prior.alpha_coeff.mean, prior.alpha_coeff.scale);
                for (i, xi) in x.iter().enumerate() {
                    if state.is_positive(i) {
                        let psi = sigmoid(a0 + a1 * xi);
                        log_l += if t.get(i) { psi.ln() } else { (1.0 - psi).ln() };
                    }
                }
                let v = w0 * w1 * log_l.exp();
                h += v;
                h0 += v * a0;
                h1 += v * a1;
            }
        }
        (h, vec![h0, h1])
    });

    let data = FitData {
        graph: &g,
        covariates: &cov,
        reports: &t,
    };
    let post = run_chains(data, ModelSpec::Heterogeneous, &prior, &short_config(22)).unwrap();
    compare("theta0", post.mean(post.param_index("theta0").unwrap()), exact.theta0, 0.03);
    compare("theta1", post.mean(post.param_index("theta1").unwrap()), exact.theta1, 0.003);
    compare("alpha0", post.mean(post.param_index("alpha0").unwrap()), exact.alphas[0], 0.04);
    compare("alpha_x", post.mean(post.param_index("alpha_x").unwrap()), exact.alphas[1], 0.03);
    for (i, (got, want)) in post.node_pr_a().iter().zip(&exact.pr_a).enumerate() {
        compare(&format!("Pr(A_{i})"), *got, *want, 0.015);
    }
}
