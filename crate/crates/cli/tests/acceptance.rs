//! Acceptance gate. Prints one `PASS`, `FAIL` or `SKIP` line per criterion.
//!
//! A failing criterion does not fail the process unless
//! `ACCEPTANCE_STRICT=1`; panics always do.

use std::cell::OnceCell;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use underreport::evaluation::{
    allocate_topk, bootstrap_mean_difference, calibration_curve, identifiability, Demographics, IntervalRecord,
};
use underreport::inference::{NormalPrior, SveaKernel};
use underreport::ising::{besag_conditional, SwendsenWang};
use underreport::pooling::{pool, GaussianFit, PoolGrid};
use underreport::rng::rng_from;
use underreport::synthetic::{
    generate_trial, run_experiment, ExperimentConfig, Predictor, SyntheticCity, TrialRecord, TrialSettings,
};
use underreport::{IsingParams, McmcConfig, ModelSpec, PriorConfig, SpatialGraph, StateVector};

struct Outcome {
    verdict: Option<bool>,
    detail: String,
}

fn pass_if(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: Some(ok),
        detail,
    }
}

// ---------------------------------------------------------------- oracles

/// `theta0 * sum A + theta1 * sum_{edges} A_i A_j`, computed from the edge list.
fn energy(bits: u64, n: usize, edges: &[(usize, usize)], t0: f64, t1: f64) -> f64 {
    let s = |i: usize| if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
    let field: f64 = (0..n).map(s).sum();
    let pair: f64 = edges.iter().map(|&(a, b)| s(a) * s(b)).sum();
    t0 * field + t1 * pair
}

fn edge_list(g: &SpatialGraph) -> Vec<(usize, usize)> {
    g.edges().iter().map(|e| (e.a, e.b)).collect()
}

/// Exact state probabilities by enumeration.
fn enumerate(g: &SpatialGraph, t0: f64, t1: f64) -> Vec<f64> {
    let n = g.len();
    let edges = edge_list(g);
    let logs: Vec<f64> = (0..1u64 << n).map(|k| energy(k, n, &edges, t0, t1)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn log_z(g: &SpatialGraph, edges: &[(usize, usize)], t0: f64, t1: f64) -> f64 {
    let logs: Vec<f64> = (0..1u64 << g.len()).map(|k| energy(k, g.len(), edges, t0, t1)).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// ---------------------------------------------------------------- 1

fn ising_exactness() -> Outcome {
    let graphs = [
        ("path-5", SpatialGraph::path(5)),
        ("cycle-6", SpatialGraph::cycle(6)),
        ("star-5", SpatialGraph::star(5)),
        ("grid-3x3", SpatialGraph::lattice(3, 3)),
    ];
    let sweeps = 200_000;
    let (mut worst_marginal, mut worst_besag) = (0.0f64, 0.0f64);
    let mut worst_case = String::new();
    for (gi, (name, g)) in graphs.iter().enumerate() {
        let n = g.len();
        let edges = edge_list(g);
        for (pi, &t0) in [-0.5, 0.0, 0.5].iter().enumerate() {
            for (qi, &t1) in [0.0, 0.1, 0.3].iter().enumerate() {
                let probs = enumerate(g, t0, t1);
                let exact: Vec<f64> = (0..n)
                    .map(|i| probs.iter().enumerate().filter(|(k, _)| k >> i & 1 == 1).map(|(_, p)| p).sum())
                    .collect();
                let params = IsingParams::new(t0, t1).unwrap();
                let mut rng = rng_from(1, &[gi as u64, pi as u64, qi as u64]);
                let mut a = StateVector::random(n, &mut rng);
                let mut sw = SwendsenWang::new(g);
                sw.run(&mut a, &params, 100, &mut rng);
                let mut counts = vec![0u64; n];
                for _ in 0..sweeps {
                    sw.sweep(&mut a, &params, &mut rng);
                    for (i, c) in counts.iter_mut().enumerate() {
                        *c += a.is_positive(i) as u64;
                    }
                }
                for i in 0..n {
                    let err = (counts[i] as f64 / sweeps as f64 - exact[i]).abs();
                    if err > worst_marginal {
                        worst_marginal = err;
                        worst_case = format!("{name} theta=({t0}, {t1}) node {i}");
                    }
                }
                for k in 0..1u64 << n {
                    let a = StateVector::from_bits(n, k);
                    for i in 0..n {
                        let (up, down) = (k | 1 << i, k & !(1 << i));
                        let pu = energy(up, n, &edges, t0, t1);
                        let pd = energy(down, n, &edges, t0, t1);
                        let oracle = 1.0 / (1.0 + (pd - pu).exp());
                        let got = besag_conditional(i, &a, &params, g).unwrap();
                        worst_besag = worst_besag.max((got - oracle).abs());
                    }
                }
            }
        }
    }
    pass_if(
        worst_marginal <= 0.02 && worst_besag <= 1e-12,
        format!(
            "max marginal error {worst_marginal:.4} at {worst_case} (tol 0.02); max Besag error {worst_besag:.1e} (tol 1e-12)"
        ),
    )
}

// ---------------------------------------------------------------- 2

fn svea_exactness() -> Outcome {
    let g = SpatialGraph::lattice(3, 3);
    let edges = edge_list(&g);
    let a = StateVector::from_vec(vec![1, 1, -1, 1, 1, -1, -1, -1, -1]).unwrap();
    let prior = PriorConfig {
        theta0: NormalPrior::new(0.0, 1.0),
        theta1: NormalPrior::new(0.2, 0.5),
        ..PriorConfig::default()
    };
    let (s0, s1) = {
        let s0: f64 = a.values().iter().map(|&v| v as f64).sum();
        let s1: f64 = edges.iter().map(|&(i, j)| (a.get(i) * a.get(j)) as f64).sum();
        (s0, s1)
    };
    // Independent exact-likelihood Metropolis with brute-force Z.
    let log_post = |t0: f64, t1: f64| -> f64 {
        if t1 < 0.0 {
            return f64::NEG_INFINITY;
        }
        let lp = -0.5 * t0 * t0 - 0.5 * ((t1 - 0.2) / 0.5).powi(2);
        lp + t0 * s0 + t1 * s1 - log_z(&g, &edges, t0, t1)
    };
    let iters = 400_000;
    let burn = 20_000;
    let mut rng = rng_from(2, &[0]);
    let (mut t0, mut t1) = (0.0, 0.2);
    let mut cur = log_post(t0, t1);
    let (mut o0, mut o1) = (Vec::with_capacity(iters), Vec::with_capacity(iters));
    for it in 0..iters + burn {
        let p0 = t0 + 0.4 * (rng.random::<f64>() * 2.0 - 1.0);
        let p1 = t1 + 0.4 * (rng.random::<f64>() * 2.0 - 1.0);
        let prop = log_post(p0, p1);
        if rng.random::<f64>().ln() < prop - cur {
            (t0, t1, cur) = (p0, p1, prop);
        }
        if it >= burn {
            o0.push(t0);
            o1.push(t1);
        }
    }
    // The exchange sampler under test.
    let mut kernel = SveaKernel::new(&g);
    let mut rng = rng_from(2, &[1]);
    let mut theta = IsingParams::new(0.0, 0.2).unwrap();
    let (mut v0, mut v1) = (Vec::with_capacity(iters), Vec::with_capacity(iters));
    let mut accepted = 0usize;
    for it in 0..iters + burn {
        let (next, acc) = kernel.update(&theta, &a, &g, &prior, 0.5, 50, &mut rng);
        theta = next;
        if it >= burn {
            accepted += acc as usize;
            v0.push(theta.theta0);
            v1.push(theta.theta1);
        }
    }
    let mut worst_mean = 0.0f64;
    let mut worst_end = 0.0f64;
    let mut parts = Vec::new();
    for (label, mut oracle, mut got) in [("theta0", o0, v0), ("theta1", o1, v1)] {
        let dm = (mean(&oracle) - mean(&got)).abs();
        oracle.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        let de = (quantile(&oracle, 0.025) - quantile(&got, 0.025))
            .abs()
            .max((quantile(&oracle, 0.975) - quantile(&got, 0.975)).abs());
        worst_mean = worst_mean.max(dm);
        worst_end = worst_end.max(de);
        parts.push(format!(
            "{label} mean {:.3} vs {:.3}, 95% ({:.3}, {:.3}) vs ({:.3}, {:.3})",
            mean(&got),
            mean(&oracle),
            quantile(&got, 0.025),
            quantile(&got, 0.975),
            quantile(&oracle, 0.025),
            quantile(&oracle, 0.975)
        ));
    }
    pass_if(
        worst_mean <= 0.1 && worst_end <= 0.15,
        format!(
            "{}; max mean gap {worst_mean:.3} (tol 0.1), max endpoint gap {worst_end:.3} (tol 0.15), acceptance {:.2}",
            parts.join("; "),
            accepted as f64 / iters as f64
        ),
    )
}

// ---------------------------------------------------------------- experiments

fn desk_mcmc(iterations: usize) -> McmcConfig {
    McmcConfig {
        chains: 2,
        total_iterations: iterations,
        burn_in: iterations / 3,
        sw_burnin: 5,
        inner_logistic_steps: 1,
        store_states: false,
        parallel: false,
        ..McmcConfig::default()
    }
}

struct Study {
    city: SyntheticCity,
    config: ExperimentConfig,
    records: Vec<TrialRecord>,
}

fn study(side: usize, trials: usize, iterations: usize, settings: TrialSettings, predictors: Vec<Predictor>, seed: u64) -> Study {
    let city = SyntheticCity::jittered_grid(side, side, 500.0, 0.3, 1).unwrap();
    let config = ExperimentConfig {
        trials,
        settings,
        predictors,
        mcmc: desk_mcmc(iterations),
        seed,
        keep_scores: true,
        parallel: false,
        ..ExperimentConfig::default()
    };
    let records = run_experiment(&city.graph, &city.covariates, &config).unwrap();
    Study { city, config, records }
}

fn ok_records(s: &Study) -> impl Iterator<Item = &TrialRecord> {
    s.records.iter().filter(|r| r.error.is_none())
}

fn failed_trials(s: &Study) -> usize {
    s.records.iter().filter(|r| r.error.is_some()).count()
}

// ---------------------------------------------------------------- 3

fn calibration(s: &Study) -> Outcome {
    let mut records = Vec::new();
    for r in ok_records(s) {
        let res = r.result(Predictor::Heterogeneous).unwrap();
        for p in &res.params {
            let group = if p.name == "theta0" || p.name == "theta1" { p.name.as_str() } else { "reporting" };
            for &(level, lo, hi) in &p.intervals {
                records.push(IntervalRecord {
                    parameter: group.into(),
                    level,
                    lo,
                    hi,
                    truth: p.truth.unwrap(),
                });
            }
        }
    }
    let rows = calibration_curve(&records);
    let worst = rows.iter().map(|r| (r.coverage - r.level).abs()).fold(0.0, f64::max);
    let cells: Vec<String> = rows
        .iter()
        .map(|r| format!("{}@{:.2}={:.3}", r.parameter, r.level, r.coverage))
        .collect();
    let trials = ok_records(s).count();
    pass_if(
        worst <= 0.05 && trials >= 100,
        format!(
            "{trials} trials on {} nodes ({} failed); worst |coverage - nominal| {worst:.3} (tol 0.05); {}",
            s.city.graph.len(),
            failed_trials(s),
            cells.join(" ")
        ),
    )
}

// ---------------------------------------------------------------- 4

fn identifiability_check(s: &Study) -> Outcome {
    let mut pairs = Vec::new();
    for r in ok_records(s) {
        for p in &r.result(Predictor::Heterogeneous).unwrap().params {
            pairs.push((p.name.clone(), p.truth.unwrap(), p.mean));
        }
    }
    let rows = identifiability(&pairs).unwrap();
    let coeffs: Vec<_> = rows.iter().filter(|r| r.parameter.starts_with("alpha_")).collect();
    let min = coeffs.iter().map(|r| r.correlation).fold(f64::INFINITY, f64::min);
    let all: Vec<String> = rows.iter().map(|r| format!("{}={:.3}", r.parameter, r.correlation)).collect();
    pass_if(
        min >= 0.85 && coeffs.len() == 6 && coeffs[0].trials >= 100,
        format!(
            "{} trials on {} nodes; min coefficient rho {min:.3} (need >= 0.85); {}",
            coeffs.first().map_or(0, |r| r.trials),
            s.city.graph.len(),
            all.join(" ")
        ),
    )
}

// ---------------------------------------------------------------- 5

fn paired_aucs(s: &Study) -> Vec<Vec<f64>> {
    let usable: Vec<&TrialRecord> = ok_records(s)
        .filter(|r| s.config.predictors.iter().all(|&p| r.result(p).and_then(|x| x.auc).is_some()))
        .collect();
    s.config
        .predictors
        .iter()
        .map(|&p| usable.iter().map(|r| r.result(p).unwrap().auc.unwrap()).collect())
        .collect()
}

fn auc_ordering(het: &Study, homo: &Study) -> Outcome {
    let a = paired_aucs(het);
    let names: Vec<&str> = het.config.predictors.iter().map(|p| p.name()).collect();
    let means: Vec<String> = names.iter().zip(&a).map(|(n, v)| format!("{n} {:.3}", mean(v))).collect();
    let gap = mean(&a[0]) - mean(&a[1]);
    let p_spatial = bootstrap_mean_difference(&a[0], &a[2], 10_000, 11).unwrap();
    let p_gp = bootstrap_mean_difference(&a[0], &a[3], 10_000, 12).unwrap();
    let het_ok = a[0].len() >= 50
        && gap >= 0.05
        && p_spatial.delta > 0.0
        && p_spatial.p_value < 0.01
        && p_gp.delta > 0.0
        && p_gp.p_value < 0.01;

    let b = paired_aucs(homo);
    let homo_names: Vec<&str> = homo.config.predictors.iter().map(|p| p.name()).collect();
    let homo_means: Vec<String> = homo_names.iter().zip(&b).map(|(n, v)| format!("{n} {:.3}", mean(v))).collect();
    let d_spatial = bootstrap_mean_difference(&b[0], &b[1], 10_000, 13).unwrap();
    let d_gp = bootstrap_mean_difference(&b[0], &b[2], 10_000, 14).unwrap();
    let homo_ok = d_spatial.delta > 0.0 && d_gp.delta > 0.0;
    pass_if(
        het_ok && homo_ok,
        format!(
            "heterogeneous data, {} trials on {} nodes: {}; het-homo {gap:.3} (need >= 0.05), p vs spatial {:.4}, p vs gp {:.4} (need < 0.01) [{}] | homogeneous data, {} trials on {} nodes: {}; homo-spatial {:+.4} (p {:.3}), homo-gp {:+.4} (p {:.3}) [{}]",
            a[0].len(),
            het.city.graph.len(),
            means.join(", "),
            p_spatial.p_value,
            p_gp.p_value,
            if het_ok { "ok" } else { "not met" },
            b[0].len(),
            homo.city.graph.len(),
            homo_means.join(", "),
            d_spatial.delta,
            d_spatial.p_value,
            d_gp.delta,
            d_gp.p_value,
            if homo_ok { "ok" } else { "not met" },
        ),
    )
}

// ---------------------------------------------------------------- 6

fn no_false_positives(studies: &[&Study]) -> Outcome {
    let (mut fits, mut bad) = (0, 0);
    for s in studies {
        for r in ok_records(s) {
            for res in r.results.iter().filter(|x| !x.params.is_empty()) {
                fits += 1;
                bad += (!res.invariants_ok) as usize;
            }
        }
    }
    pass_if(bad == 0 && fits > 0, format!("{fits} fits checked, {bad} with a retained sample violating clamping or support"))
}

// ---------------------------------------------------------------- 7

fn pooling_oracle() -> Outcome {
    let (mut worst, mut worst_order) = (0.0f64, 0.0f64);
    let cases = 40;
    for seed in 0..cases {
        let mut rng = rng_from(7, &[seed]);
        let k = rng.random_range(1..=4);
        let s0 = 0.5 + rng.random::<f64>();
        let m0 = rng.random_range(-0.5..0.5);
        let fits: Vec<GaussianFit> = (0..k)
            .map(|e| GaussianFit {
                mean: rng.random_range(-1.0..1.0),
                sd: s0 * (0.15 + 0.6 * rng.random::<f64>()),
                source: format!("e{e}"),
            })
            .collect();
        let d = (k - 1) as f64;
        let prec: f64 = fits.iter().map(|f| f.sd.powi(-2)).sum::<f64>() - d * s0.powi(-2);
        let m = (fits.iter().map(|f| f.mean * f.sd.powi(-2)).sum::<f64>() - d * m0 * s0.powi(-2)) / prec;
        let sd = prec.powf(-0.5);
        let p = pool("x", &fits, m0, s0, PoolGrid::default()).unwrap();
        worst = worst.max((p.mean - m).abs()).max((p.sd - sd).abs());
        let mut shuffled = fits.clone();
        shuffled.shuffle(&mut rng);
        let q = pool("x", &shuffled, m0, s0, PoolGrid::default()).unwrap();
        worst_order = worst_order.max((p.mean - q.mean).abs()).max((p.sd - q.sd).abs());
    }
    pass_if(
        worst <= 1e-4 && worst_order <= 1e-12,
        format!("{cases} random cases: max mean/sd error {worst:.1e} (tol 1e-4); max reorder change {worst_order:.1e} (tol 1e-12)"),
    )
}

// ---------------------------------------------------------------- 8

fn equity(s: &Study) -> Outcome {
    let share = s.city.share("white_share").unwrap();
    let demo = Demographics {
        population: s.city.covariates.population.clone(),
        names: vec!["white_share".into()],
        shares: vec![share],
    };
    let n = s.city.graph.len();
    let (mut wins, mut trials) = (0, 0);
    let (mut d_het, mut d_homo, mut d_oracle) = (Vec::new(), Vec::new(), Vec::new());
    for r in ok_records(s) {
        let mut eligible = vec![true; n];
        for &i in &r.reported {
            eligible[i] = false;
        }
        let served = |p: Predictor| {
            let scores = r.result(p).unwrap().scores.as_ref().unwrap();
            allocate_topk(scores, &eligible, 100, &demo).unwrap()
        };
        let (het, homo) = (served(Predictor::Heterogeneous), served(Predictor::Homogeneous));
        let dh = (het.served[0] - het.base_rate[0]).abs();
        let dm = (homo.served[0] - homo.base_rate[0]).abs();
        wins += (dh < dm) as usize;
        trials += 1;
        d_het.push(dh);
        d_homo.push(dm);
        // Diagnostic: the same allocation ranked by the true event field.
        let mut rng = rng_from(r.seed, &[0]);
        let truth = generate_trial(&s.city.graph, &s.city.covariates, &s.config.settings, &s.config.prior, &mut rng).unwrap();
        let scores: Vec<f64> = (0..n).map(|i| truth.a.is_positive(i) as u8 as f64).collect();
        let oracle = allocate_topk(&scores, &eligible, 100, &demo).unwrap();
        d_oracle.push(oracle.served[0] - oracle.base_rate[0]);
    }
    let need = (0.8 * trials as f64).ceil() as usize;
    pass_if(
        trials >= 50 && wins >= need,
        format!(
            "{trials} trials on {n} nodes, k=100: heterogeneous closer in {wins} (need >= {need}); mean |served - base| het {:.4}, homo {:.4}; true-field selection served - base {:+.4}",
            mean(&d_het),
            mean(&d_homo),
            mean(&d_oracle)
        ),
    )
}

// ---------------------------------------------------------------- 9

fn real_data() -> Outcome {
    let dir = std::env::var_os("UNDERREPORT_REAL_DATA_DIR").map(PathBuf::from);
    let files = ["reports.csv", "tracts.geojson", "covariates.csv"];
    match dir {
        Some(d) if files.iter().all(|f| d.join(f).exists()) => Outcome {
            verdict: Some(false),
            detail: format!("data found in {} but the empirical reproduction is not wired in", d.display()),
        },
        _ => Outcome {
            verdict: None,
            detail: "event reports, tract geometry and census covariates are not available (set UNDERREPORT_REAL_DATA_DIR)".into(),
        },
    }
}

// ---------------------------------------------------------------- 10

fn cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_underreport"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut reports = String::from("node_id,timestamp\n");
    for k in 0..24 {
        reports.push_str(&format!("t{:02},2021-03-{:02}T{:02}:00:00Z\n", (k * 7) % 25, 1 + k / 3, k));
    }
    std::fs::write(dir.join("reports.csv"), reports).unwrap();
    let url = "https://example.invalid/reports.csv";
    std::fs::create_dir_all(dir.join("cache")).unwrap();
    std::fs::write(dir.join("cache").join(sha256_hex(url)), b"node_id\n").unwrap();

    let fit = |out: &'static str, seed: &'static str| {
        vec![
            "fit", "--graph", "g", "--dataset", "d/dataset.csv", "--chains", "2", "--iterations", "300", "--seed", seed,
            "--set", "mcmc.burn_in=100", "--set", "mcmc.parallel=false", "--out", out,
        ]
    };
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("g", vec!["build-graph", "--set", "synthetic.rows=5", "--set", "synthetic.cols=5", "--out", "g"]),
        (
            "d",
            vec!["build-dataset", "--graph", "g", "--reports", "reports.csv", "--covariates", "g/covariates.csv", "--cutoff-fraction", "0.3", "--out", "d"],
        ),
        ("f1", fit("f1", "1")),
        ("f2", fit("f2", "2")),
        ("e", vec!["evaluate", "--graph", "g", "--dataset", "d/dataset.csv", "--prediction", "m=f1/scores.csv", "--set", "iterates=100", "--out", "e"]),
        ("p", vec!["pool", "--event", "f1", "--event", "f2", "--set", "grid.points=801", "--out", "p"]),
        ("a", vec!["allocate", "--graph", "g", "--scores", "f1/scores.csv", "--covariates", "g/covariates.csv", "--k", "5", "--out", "a"]),
        (
            "s",
            vec![
                "simulate", "--trials", "2", "--seed", "3", "--set", "city.rows=5", "--set", "city.cols=5", "--set",
                "experiment.mcmc.total_iterations=150", "--set", "experiment.mcmc.burn_in=50", "--set", "experiment.mcmc.chains=2",
                "--set", "iterates=100", "--out", "s",
            ],
        ),
        ("c", vec!["calibrate", "--trials", "s/trials.ndjson", "--out", "c"]),
        ("x", vec!["fetch", "--url", url, "--cache-dir", "cache", "--out", "x"]),
    ];
    let (mut compared, mut differing) = (0, Vec::new());
    for (out, args) in &runs {
        cli(dir, args);
        let replay = format!("{out}-replay");
        let manifest = format!("{out}/manifest.toml");
        let command = args[0];
        cli(dir, &[command, "--config", &manifest, "--out", &replay]);
        let m: toml::Table = std::fs::read_to_string(dir.join(&manifest)).unwrap().parse().unwrap();
        for name in m["outputs"].as_table().unwrap().keys() {
            compared += 1;
            let a = std::fs::read(dir.join(out).join(name)).unwrap();
            let b = std::fs::read(dir.join(&replay).join(name)).unwrap();
            if a != b {
                differing.push(format!("{command}:{name}"));
            }
        }
    }
    pass_if(
        differing.is_empty() && compared > 0,
        format!(
            "{} commands replayed from their manifests, {compared} output files compared, {} differ{}",
            runs.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(": {}", differing.join(", ")) }
        ),
    )
}

fn sha256_hex(s: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------- driver

fn main() {
    let mut outcomes: Vec<(&str, Outcome, f64)> = Vec::new();
    // `ACCEPTANCE_ONLY=3,5` runs a subset by criterion number.
    let only: Option<Vec<String>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let mut run = |label: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let number = label.split(' ').next().unwrap_or_default();
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == number)) {
            return;
        }
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        let tag = match o.verdict {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("{tag} {label}: {} ({secs:.1} s)", o.detail);
        outcomes.push((label, o, secs));
    };

    run("1 ising exactness", &mut ising_exactness);
    run("2 exchange update exactness", &mut svea_exactness);

    let all = vec![Predictor::Heterogeneous, Predictor::Homogeneous, Predictor::Spatial, Predictor::Gp];
    let het_only = vec![Predictor::Heterogeneous];
    let hetero = TrialSettings::default();
    let homo = TrialSettings {
        mode: ModelSpec::Homogeneous,
        ..TrialSettings::default()
    };
    // Studies are built on first use so their cost lands on that criterion.
    let calib = OnceCell::new();
    let calib = || calib.get_or_init(|| study(16, 400, 2500, hetero.clone(), het_only.clone(), 5));
    run("3 calibration", &mut || calibration(calib()));
    let ident = OnceCell::new();
    let ident = || ident.get_or_init(|| study(28, 100, 2500, hetero.clone(), het_only.clone(), 6));
    run("4 identifiability", &mut || identifiability_check(ident()));
    let auc_het = OnceCell::new();
    let auc_het = || auc_het.get_or_init(|| study(16, 50, 1500, hetero.clone(), all.clone(), 9));
    let auc_homo = OnceCell::new();
    let homo_predictors = vec![Predictor::Homogeneous, Predictor::Spatial, Predictor::Gp];
    let auc_homo = || auc_homo.get_or_init(|| study(28, 100, 1000, homo.clone(), homo_predictors.clone(), 9));
    run("5 auc ordering", &mut || auc_ordering(auc_het(), auc_homo()));
    let equity_study = OnceCell::new();
    let equity_study = || {
        equity_study.get_or_init(|| {
            let settings = TrialSettings {
                fixed_coeffs: vec![(4, -1.0)],
                ..hetero.clone()
            };
            study(28, 50, 2500, settings, vec![Predictor::Heterogeneous, Predictor::Homogeneous], 10)
        })
    };
    run("6 no false positives", &mut || {
        no_false_positives(&[calib(), ident(), auc_het(), auc_homo(), equity_study()])
    });
    run("7 pooling oracle", &mut pooling_oracle);
    run("8 equity", &mut || equity(equity_study()));
    run("9 real-data reproduction", &mut real_data);
    run("10 determinism", &mut determinism);

    let failed: Vec<&str> = outcomes.iter().filter(|(_, o, _)| o.verdict == Some(false)).map(|(l, _, _)| *l).collect();
    let passed = outcomes.iter().filter(|(_, o, _)| o.verdict == Some(true)).count();
    let skipped = outcomes.iter().filter(|(_, o, _)| o.verdict.is_none()).count();
    println!("acceptance: {passed} passed, {} failed, {skipped} skipped", failed.len());
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
