use rand::seq::SliceRandom;
use rand::Rng;
use underreport::pooling::{pool, GaussianFit, PoolGrid};
use underreport::rng::rng_from;

/// Product of normals divided by the prior `K - 1` times, in closed form.
fn closed_form(fits: &[GaussianFit], m0: f64, s0: f64) -> (f64, f64) {
    let d = (fits.len() - 1) as f64;
    let precision: f64 = fits.iter().map(|f| f.sd.powi(-2)).sum::<f64>() - d * s0.powi(-2);
    let weighted: f64 = fits.iter().map(|f| f.mean * f.sd.powi(-2)).sum::<f64>() - d * m0 * s0.powi(-2);
    (weighted / precision, precision.powf(-0.5))
}

fn random_case(seed: u64) -> (Vec<GaussianFit>, f64, f64) {
    let mut rng = rng_from(seed, &[]);
    let k = rng.random_range(1..=6);
    let s0 = 0.5 + rng.random::<f64>();
    let fits = (0..k)
        .map(|e| GaussianFit {
            mean: rng.random_range(-1.0..1.0),
            // below the prior scale so the pooled precision stays positive
            sd: s0 * (0.15 + 0.6 * rng.random::<f64>()),
            source: format!("event{e}"),
        })
        .collect();
    (fits, rng.random_range(-0.5..0.5), s0)
}

#[test]
fn grid_pool_matches_closed_form() {
    for seed in 0..20 {
        let (fits, m0, s0) = random_case(seed);
        let (mean, sd) = closed_form(&fits, m0, s0);
        let p = pool("x", &fits, m0, s0, PoolGrid::default()).unwrap();
        assert!((p.mean - mean).abs() < 1e-4, "seed {seed}: {} vs {mean}", p.mean);
        assert!((p.sd - sd).abs() < 1e-4, "seed {seed}: {} vs {sd}", p.sd);
        assert!((p.median - mean).abs() < 1e-4);
        assert!((p.lo95 - (mean - 1.959963984540054 * sd)).abs() < 1e-4);
        assert!((p.hi95 - (mean + 1.959963984540054 * sd)).abs() < 1e-4);
        assert!((p.integral() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pool_is_invariant_to_event_order() {
    let mut rng = rng_from(99, &[]);
    for seed in 0..20 {
        let (fits, m0, s0) = random_case(seed);
        let base = pool("x", &fits, m0, s0, PoolGrid::default()).unwrap();
        let mut shuffled = fits.clone();
        shuffled.shuffle(&mut rng);
        let p = pool("x", &shuffled, m0, s0, PoolGrid::default()).unwrap();
        assert!((p.mean - base.mean).abs() < 1e-12);
        assert!((p.sd - base.sd).abs() < 1e-12);
        assert!((p.lo95 - base.lo95).abs() < 1e-12 && (p.hi95 - base.hi95).abs() < 1e-12);
    }
}
