//! Combining per-event posteriors of shared reporting coefficients.
//!
//! Each event's posterior is summarized by a moment-matched normal. The
//! pooled density is the prior times the product of per-event posterior to
//! prior ratios, evaluated on a grid and normalized numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean, normal_log_pdf, sample_variance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub sd: f64,
    pub source: String,
}

/// Moment-matched normal with the sample standard deviation.
pub fn fit_gaussian(samples: &[f64], source: &str) -> Result<GaussianFit> {
    let first = samples.first().copied();
    if samples.len() < 2 || samples.iter().all(|&v| Some(v) == first) {
        return Err(Error::DegenerateSamples(format!(
            "`{source}` needs at least two distinct draws"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSamples(format!("`{source}` has non-finite draws")));
    }
    Ok(GaussianFit {
        mean: mean(samples),
        sd: sample_variance(samples).sqrt(),
        source: source.to_string(),
    })
}

/// Evaluation grid for the pooled density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolGrid {
    pub points: usize,
    /// Half-width in units of the largest input standard deviation.
    pub half_width_sds: f64,
    /// Explicit `(lo, hi)` overriding the automatic range.
    pub range: Option<(f64, f64)>,
}

impl Default for PoolGrid {
    fn default() -> Self {
        PoolGrid {
            points: 4001,
            half_width_sds: 6.0,
            range: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledPosterior {
    pub label: String,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
    pub inputs: Vec<GaussianFit>,
    pub prior_mean: f64,
    pub prior_sd: f64,
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Quantile of a normalized grid density by inverting the cumulative
/// trapezoid integral with linear interpolation.
fn grid_quantile(x: &[f64], cdf: &[f64], q: f64) -> f64 {
    let k = cdf.partition_point(|&c| c < q);
    if k == 0 {
        return x[0];
    }
    if k >= x.len() {
        return x[x.len() - 1];
    }
    let span = cdf[k] - cdf[k - 1];
    if span <= 0.0 {
        return x[k];
    }
    x[k - 1] + (q - cdf[k - 1]) / span * (x[k] - x[k - 1])
}

/// Pools `fits` under a normal prior with mean `prior_mean` and standard
/// deviation `prior_sd`.
pub fn pool(
    label: &str,
    fits: &[GaussianFit],
    prior_mean: f64,
    prior_sd: f64,
    grid: PoolGrid,
) -> Result<PooledPosterior> {
    if fits.is_empty() {
        return Err(Error::InvalidConfig("pooling needs at least one fit".into()));
    }
    if !(prior_sd > 0.0) || fits.iter().any(|f| !(f.sd > 0.0)) {
        return Err(Error::InvalidConfig("pooling needs positive standard deviations".into()));
    }
    if grid.points < 3 {
        return Err(Error::InvalidConfig("pooling grid needs at least 3 points".into()));
    }
    let divisions = fits.len() - 1;
    let fit_precision: f64 = fits.iter().map(|f| f.sd.powi(-2)).sum();
    let prior_precision = prior_sd.powi(-2);
    let precision = fit_precision - divisions as f64 * prior_precision;
    if !(precision > 0.0) {
        return Err(Error::NonIntegrablePool {
            precision,
            fit_precision,
            prior_precision,
            divisions,
        });
    }

    let (lo, hi) = grid.range.unwrap_or_else(|| {
        let max_sd = fits.iter().map(|f| f.sd).fold(0.0, f64::max);
        let min_mean = fits.iter().map(|f| f.mean).fold(f64::INFINITY, f64::min);
        let max_mean = fits.iter().map(|f| f.mean).fold(f64::NEG_INFINITY, f64::max);
        (
            min_mean - grid.half_width_sds * max_sd,
            max_mean + grid.half_width_sds * max_sd,
        )
    });
    if !(hi > lo) {
        return Err(Error::InvalidConfig("pooling grid range is empty".into()));
    }
    let step = (hi - lo) / (grid.points - 1) as f64;
    let xs: Vec<f64> = (0..grid.points).map(|k| lo + k as f64 * step).collect();
    let log_density: Vec<f64> = xs
        .iter()
        .map(|&x| {
            fits.iter().map(|f| normal_log_pdf(x, f.mean, f.sd)).sum::<f64>()
                - divisions as f64 * normal_log_pdf(x, prior_mean, prior_sd)
        })
        .collect();
    let max = log_density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut density: Vec<f64> = log_density.iter().map(|l| (l - max).exp()).collect();
    let z = trapezoid(&xs, &density);
    for d in &mut density {
        *d /= z;
    }

    let m = trapezoid(&xs, &xs.iter().zip(&density).map(|(x, d)| x * d).collect::<Vec<_>>());
    let var = trapezoid(
        &xs,
        &xs.iter().zip(&density).map(|(x, d)| (x - m).powi(2) * d).collect::<Vec<_>>(),
    );
    let mut cdf = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for k in 1..xs.len() {
        acc += 0.5 * step * (density[k - 1] + density[k]);
        cdf.push(acc);
    }
    Ok(PooledPosterior {
        label: label.to_string(),
        mean: m,
        sd: var.sqrt(),
        median: grid_quantile(&xs, &cdf, 0.5),
        lo95: grid_quantile(&xs, &cdf, 0.025),
        hi95: grid_quantile(&xs, &cdf, 0.975),
        grid: xs,
        density,
        inputs: fits.to_vec(),
        prior_mean,
        prior_sd,
    })
}

impl PooledPosterior {
    /// Trapezoid integral of the stored density.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

/// Retained draws of one event's fit, one column per parameter label.
#[derive(Clone, Debug, PartialEq)]
pub struct EventDraws {
    pub event: String,
    pub labels: Vec<String>,
    pub draws: Vec<Vec<f64>>,
}

/// Event-specific parameters never pooled.
pub const EVENT_SPECIFIC: [&str; 4] = ["theta0", "theta1", "alpha0", "alpha"];

/// Pools every shared coefficient across events. All events must carry the
/// same labels in the same order.
pub fn pooled_summary_table(
    events: &[EventDraws],
    prior_mean: f64,
    prior_sd: f64,
    grid: PoolGrid,
) -> Result<Vec<PooledPosterior>> {
    let first = events
        .first()
        .ok_or_else(|| Error::InvalidConfig("pooling needs at least one event".into()))?;
    for e in events {
        if e.labels != first.labels {
            return Err(Error::LabelMismatch(format!(
                "`{}` has [{}] but `{}` has [{}]",
                e.event,
                e.labels.join(", "),
                first.event,
                first.labels.join(", ")
            )));
        }
    }
    first
        .labels
        .iter()
        .enumerate()
        .filter(|(_, l)| !EVENT_SPECIFIC.contains(&l.as_str()))
        .map(|(k, label)| {
            let fits = events
                .iter()
                .map(|e| fit_gaussian(&e.draws[k], &e.event))
                .collect::<Result<Vec<_>>>()?;
            pool(label, &fits, prior_mean, prior_sd, grid)
        })
        .collect()
}
