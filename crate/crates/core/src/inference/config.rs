use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingParams;
use crate::math::{log_normal_cdf, normal_log_pdf};
use crate::observation::ReportingParams;

/// How the second parameter of a normal prior is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleConvention {
    #[default]
    StandardDeviation,
    Variance,
}

impl fmt::Display for ScaleConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleConvention::StandardDeviation => "standard-deviation",
            ScaleConvention::Variance => "variance",
        })
    }
}

impl FromStr for ScaleConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-deviation" | "sd" => Ok(ScaleConvention::StandardDeviation),
            "variance" | "var" => Ok(ScaleConvention::Variance),
            other => Err(Error::parse("scale convention", other)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub scale: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, scale: f64) -> Self {
        NormalPrior { mean, scale }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

/// Priors on all model parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub theta0: NormalPrior,
    /// Truncated to `[0, inf)`.
    pub theta1: NormalPrior,
    pub alpha0: NormalPrior,
    /// Shared by every covariate coefficient.
    pub alpha_coeff: NormalPrior,
    pub homo_alpha: BetaPrior,
    pub scale_convention: ScaleConvention,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            theta0: NormalPrior::new(0.0, 0.5),
            theta1: NormalPrior::new(0.1, 0.03),
            alpha0: NormalPrior::new(0.0, 1.0),
            alpha_coeff: NormalPrior::new(0.0, 0.5),
            homo_alpha: BetaPrior { a: 1.2, b: 0.8 },
            scale_convention: ScaleConvention::StandardDeviation,
        }
    }
}

/// Truncation keeping less mass than this is rejected; the theta1 prior is
/// sampled by rejection.
const MIN_TRUNCATED_MASS: f64 = 1e-3;

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("theta0", self.theta0),
            ("theta1", self.theta1),
            ("alpha0", self.alpha0),
            ("alpha_coeff", self.alpha_coeff),
        ] {
            if !(p.scale > 0.0 && p.scale.is_finite() && p.mean.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "prior `{name}` needs a finite mean and positive scale"
                )));
            }
        }
        if !(self.homo_alpha.a > 0.0 && self.homo_alpha.b > 0.0) {
            return Err(Error::InvalidConfig("beta prior shapes must be positive".into()));
        }
        if log_normal_cdf(self.theta1.mean / self.sd(self.theta1)) < MIN_TRUNCATED_MASS.ln() {
            return Err(Error::InvalidConfig(
                "theta1 prior keeps too little mass above zero".into(),
            ));
        }
        Ok(())
    }

    /// Standard deviation of a normal prior under the configured convention.
    pub fn sd(&self, p: NormalPrior) -> f64 {
        match self.scale_convention {
            ScaleConvention::StandardDeviation => p.scale,
            ScaleConvention::Variance => p.scale.sqrt(),
        }
    }

    fn log_normal(&self, x: f64, p: NormalPrior) -> f64 {
        normal_log_pdf(x, p.mean, self.sd(p))
    }

    /// Log prior of `(theta0, theta1)` up to the truncation constant.
    pub fn log_prior_theta(&self, theta0: f64, theta1: f64) -> f64 {
        if theta1 < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_normal(theta0, self.theta0) + self.log_normal(theta1, self.theta1)
    }

    /// Log prior of heterogeneous coefficients `[alpha0, coeffs..]`.
    pub fn log_prior_alphas(&self, alphas: &[f64]) -> f64 {
        alphas
            .iter()
            .enumerate()
            .map(|(l, &a)| self.log_normal(a, self.alpha_prior(l)))
            .sum()
    }

    /// Prior of entry `l` of `[alpha0, coeffs..]`.
    pub fn alpha_prior(&self, l: usize) -> NormalPrior {
        if l == 0 {
            self.alpha0
        } else {
            self.alpha_coeff
        }
    }

    fn draw_normal<R: Rng + ?Sized>(&self, p: NormalPrior, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        p.mean + self.sd(p) * z
    }

    pub fn sample_ising<R: Rng + ?Sized>(&self, rng: &mut R) -> IsingParams {
        let theta0 = self.draw_normal(self.theta0, rng);
        let theta1 = loop {
            let t = self.draw_normal(self.theta1, rng);
            if t >= 0.0 {
                break t;
            }
        };
        IsingParams { theta0, theta1 }
    }

    pub fn sample_homo_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Beta::new(self.homo_alpha.a, self.homo_alpha.b)
            .expect("validated shapes")
            .sample(rng)
    }

    /// `[alpha0, coeffs..]` with `n_features` coefficients.
    pub fn sample_alphas<R: Rng + ?Sized>(&self, n_features: usize, rng: &mut R) -> Vec<f64> {
        (0..=n_features)
            .map(|l| self.draw_normal(self.alpha_prior(l), rng))
            .collect()
    }

    pub fn sample_reporting<R: Rng + ?Sized>(
        &self,
        spec: ModelSpec,
        n_features: usize,
        rng: &mut R,
    ) -> ReportingParams {
        match spec {
            ModelSpec::Homogeneous => ReportingParams::Homogeneous {
                alpha: self.sample_homo_alpha(rng),
            },
            ModelSpec::Heterogeneous => {
                let mut a = self.sample_alphas(n_features, rng);
                let alpha0 = a.remove(0);
                ReportingParams::Heterogeneous { alpha0, coeffs: a }
            }
        }
    }
}

/// Reporting model fitted or simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpec {
    Homogeneous,
    Heterogeneous,
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelSpec::Homogeneous => "homogeneous",
            ModelSpec::Heterogeneous => "heterogeneous",
        })
    }
}

impl FromStr for ModelSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(ModelSpec::Homogeneous),
            "heterogeneous" => Ok(ModelSpec::Heterogeneous),
            other => Err(Error::parse("model", other)),
        }
    }
}

/// Sampler settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub chains: usize,
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin_keep_fraction: f64,
    pub sw_burnin: usize,
    pub proposal_step: f64,
    pub adapt_interval: usize,
    pub accept_band: (f64, f64),
    pub adapt_factor: f64,
    pub inner_logistic_steps: usize,
    /// Add the joint shift move of `theta0`, the reporting intercept and the
    /// latent field to every iteration.
    pub shift_move: bool,
    /// Intermediate sweeps bridging the shift move's auxiliary field back
    /// to the current parameters.
    pub shift_bridge: usize,
    pub seed: u64,
    /// Keep per-sample latent states (needed for the bitset output).
    pub store_states: bool,
    /// Run chains on the rayon pool.
    pub parallel: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 3,
            total_iterations: 60_000,
            burn_in: 20_000,
            thin_keep_fraction: 0.5,
            sw_burnin: 50,
            proposal_step: 0.2,
            adapt_interval: 50,
            accept_band: (0.25, 0.60),
            adapt_factor: 0.15,
            inner_logistic_steps: 50,
            shift_move: true,
            shift_bridge: 10,
            seed: 0,
            store_states: true,
            parallel: true,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.chains == 0 {
            return fail("chains must be at least 1");
        }
        if self.total_iterations == 0 {
            return fail("total_iterations must be at least 1");
        }
        if self.burn_in >= self.total_iterations {
            return fail("burn_in must be smaller than total_iterations");
        }
        if !(self.thin_keep_fraction > 0.0 && self.thin_keep_fraction <= 1.0) {
            return fail("thin_keep_fraction must lie in (0, 1]");
        }
        if self.sw_burnin == 0 {
            return fail("sw_burnin must be at least 1");
        }
        if !(self.proposal_step > 0.0 && self.proposal_step.is_finite()) {
            return fail("proposal_step must be positive");
        }
        if self.adapt_interval == 0 {
            return fail("adapt_interval must be at least 1");
        }
        let (lo, hi) = self.accept_band;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return fail("accept_band must be ordered within [0, 1]");
        }
        if !(self.adapt_factor >= 0.0 && self.adapt_factor < 1.0) {
            return fail("adapt_factor must lie in [0, 1)");
        }
        if self.inner_logistic_steps == 0 {
            return fail("inner_logistic_steps must be at least 1");
        }
        Ok(())
    }

    /// Keep every `stride`-th post-burn-in iteration.
    pub fn thin_stride(&self) -> usize {
        (1.0 / self.thin_keep_fraction - 1e-9).ceil().max(1.0) as usize
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.total_iterations - self.burn_in).div_ceil(self.thin_stride())
    }
}
