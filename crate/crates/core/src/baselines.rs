//! Comparison predictors: neighbor report fraction and Gaussian-process
//! regression over node centroids.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::{Point, SpatialGraph};
use crate::math::mean;
use crate::observation::ReportVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselinePrediction {
    pub model: String,
    pub scores: Vec<f64>,
}

/// Fraction of each node's neighbors that reported.
pub fn spatial_baseline(t: &ReportVector, graph: &SpatialGraph) -> Result<BaselinePrediction> {
    check_len("training reports", graph.len(), t.len())?;
    let scores = (0..graph.len())
        .map(|i| {
            let nb = graph.neighbors(i);
            if nb.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "node `{}` has no neighbors",
                    graph.node_id(i)
                )));
            }
            Ok(nb.iter().filter(|&&j| t.get(j)).count() as f64 / nb.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselinePrediction {
        model: "spatial".into(),
        scores,
    })
}

/// Hyperparameter grid and numerical settings of the GP baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Squared-exponential length scales, in centroid units.
    pub length_scales: Vec<f64>,
    /// Observation noise standard deviations.
    pub noises: Vec<f64>,
    /// Lower bound on the signal variance (the empirical label variance).
    pub min_signal_variance: f64,
    pub jitter_start: f64,
    pub jitter_max: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            length_scales: (0..6).map(|k| 10f64.powf(2.0 + 0.5 * k as f64)).collect(),
            noises: vec![0.05, 0.1, 0.2],
            min_signal_variance: 1e-6,
            jitter_start: 1e-8,
            jitter_max: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpFit {
    pub prediction: BaselinePrediction,
    pub length_scale: f64,
    pub noise: f64,
    pub signal_variance: f64,
    pub log_marginal_likelihood: f64,
}

fn se_kernel(points: &[Point], signal_var: f64, length_scale: f64) -> DMatrix<f64> {
    let n = points.len();
    let inv = -0.5 / (length_scale * length_scale);
    DMatrix::from_fn(n, n, |r, c| {
        let dx = points[r].x - points[c].x;
        let dy = points[r].y - points[c].y;
        signal_var * (inv * (dx * dx + dy * dy)).exp()
    })
}

fn cholesky_with_jitter(mut k: DMatrix<f64>, config: &GpConfig) -> Result<Cholesky<f64, Dyn>> {
    let mut jitter = config.jitter_start;
    let mut added = 0.0;
    loop {
        for d in 0..k.nrows() {
            k[(d, d)] += jitter - added;
        }
        added = jitter;
        if let Some(c) = k.clone().cholesky() {
            return Ok(c);
        }
        if jitter >= config.jitter_max {
            return Err(Error::SingularKernel(jitter));
        }
        jitter = (jitter * 10.0).min(config.jitter_max);
    }
}

/// GP regression of binary labels with a constant mean at the label mean,
/// for fixed hyperparameters. Scores are posterior means at `points` clipped
/// to `[0, 1]`.
pub fn gp_fit_fixed(
    labels: &[f64],
    points: &[Point],
    length_scale: f64,
    noise: f64,
    config: &GpConfig,
) -> Result<GpFit> {
    check_len("centroids", labels.len(), points.len())?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyAfterExclusion);
    }
    let m = mean(labels);
    let signal_var = if n > 1 {
        crate::math::sample_variance(labels).max(config.min_signal_variance)
    } else {
        config.min_signal_variance
    };
    let kf = se_kernel(points, signal_var, length_scale);
    let mut ky = kf.clone();
    for d in 0..n {
        ky[(d, d)] += noise * noise;
    }
    let chol = cholesky_with_jitter(ky, config)?;
    let r = DVector::from_fn(n, |i, _| labels[i] - m);
    let alpha = chol.solve(&r);
    let fitted = &kf * &alpha;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    let lml = -0.5 * r.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(GpFit {
        prediction: BaselinePrediction {
            model: "gp".into(),
            scores: fitted.iter().map(|f| (m + f).clamp(0.0, 1.0)).collect(),
        },
        length_scale,
        noise,
        signal_variance: signal_var,
        log_marginal_likelihood: lml,
    })
}

/// GP baseline with hyperparameters chosen by marginal likelihood over the
/// configured grid. Ties keep the first grid point.
pub fn gp_baseline(t: &ReportVector, centroids: &[Point], config: &GpConfig) -> Result<GpFit> {
    check_len("centroids", t.len(), centroids.len())?;
    if config.length_scales.is_empty() || config.noises.is_empty() {
        return Err(Error::InvalidConfig("GP hyperparameter grid is empty".into()));
    }
    let labels: Vec<f64> = t.values().iter().map(|&v| v as u8 as f64).collect();
    let mut best: Option<GpFit> = None;
    for &ls in &config.length_scales {
        for &noise in &config.noises {
            let fit = gp_fit_fixed(&labels, centroids, ls, noise, config)?;
            if best
                .as_ref()
                .map_or(true, |b| fit.log_marginal_likelihood > b.log_marginal_likelihood)
            {
                best = Some(fit);
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}
