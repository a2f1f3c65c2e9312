//! Shared fixtures for the benchmarks.

use underreport::rng::rng_from;
use underreport::synthetic::{generate_trial, GeneratedTrial, SyntheticCity, TrialSettings};
use underreport::PriorConfig;

/// A synthetic city with one simulated trial on it.
pub struct Fixture {
    pub city: SyntheticCity,
    pub trial: GeneratedTrial,
    pub prior: PriorConfig,
}

impl Fixture {
    /// `side x side` tracts; deterministic in `seed`.
    pub fn new(side: usize, seed: u64) -> Fixture {
        let city = SyntheticCity::jittered_grid(side, side, 500.0, 0.3, seed).expect("valid city");
        let prior = PriorConfig::default();
        let trial = generate_trial(
            &city.graph,
            &city.covariates,
            &TrialSettings::default(),
            &prior,
            &mut rng_from(seed, &[1]),
        )
        .expect("trial");
        Fixture { city, trial, prior }
    }
}
