//! Semi-synthetic data: a synthetic city, ground-truth generation from the
//! priors, and the repeated-trial protocol.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{gp_baseline, spatial_baseline, GpConfig};
use crate::covariates::{standardize_matrix, CovariateTable, RawCovariates, DEFAULT_FEATURES};
use crate::error::{Error, Result};
use crate::evaluation::{auc, rmse};
use crate::graph::{build_adjacency_from_polygons, AdjacencyOptions, MultiPolygon, Point, Polygon, SpatialGraph};
use crate::inference::{run_chains, summarize, FitData, McmcConfig, ModelSpec, PriorConfig};
use crate::ising::{IsingParams, StateVector, SwendsenWang};
use crate::observation::{reporting_rates, simulate_reports, ReportVector, ReportingParams};
use crate::rng::{derive_seed, rng_from};

/// Ground-truth mixing budget in Swendsen-Wang sweeps from a random start.
pub const DEFAULT_TRUTH_SWEEPS: usize = 500;

/// A tessellated city with node covariates.
#[derive(Clone, Debug)]
pub struct SyntheticCity {
    pub graph: SpatialGraph,
    pub polygons: Vec<(String, MultiPolygon)>,
    pub raw: RawCovariates,
    /// Standardized [`DEFAULT_FEATURES`] with node populations.
    pub covariates: CovariateTable,
}

/// Smooth random field: a few random plane waves with wavelengths between
/// `min_wl` and `max_wl`, scaled to unit variance.
fn smooth_field<R: Rng + ?Sized>(points: &[Point], min_wl: f64, max_wl: f64, rng: &mut R) -> Vec<f64> {
    const WAVES: usize = 6;
    let waves: Vec<(f64, f64, f64)> = (0..WAVES)
        .map(|_| {
            let wl = min_wl + (max_wl - min_wl) * rng.random::<f64>();
            let dir = 2.0 * PI * rng.random::<f64>();
            let k = 2.0 * PI / wl;
            (k * dir.cos(), k * dir.sin(), 2.0 * PI * rng.random::<f64>())
        })
        .collect();
    let norm = (2.0 / WAVES as f64).sqrt();
    points
        .iter()
        .map(|p| norm * waves.iter().map(|(kx, ky, ph)| (kx * p.x + ky * p.y + ph).cos()).sum::<f64>())
        .collect()
}

impl SyntheticCity {
    /// `rows x cols` quadrilateral tracts of side `cell` whose interior
    /// corners are displaced by up to `jitter * cell` in each axis. Tracts
    /// sharing a side are adjacent.
    pub fn jittered_grid(rows: usize, cols: usize, cell: f64, jitter: f64, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("synthetic city needs at least one tract".into()));
        }
        if !(0.0..0.5).contains(&jitter) {
            return Err(Error::InvalidConfig("jitter must lie in [0, 0.5)".into()));
        }
        let mut rng = rng_from(seed, &[0]);
        let corner = |r: usize, c: usize, rng: &mut crate::rng::SimRng| {
            let interior = r > 0 && r < rows && c > 0 && c < cols;
            let (mut dx, mut dy) = (0.0, 0.0);
            if interior {
                dx = (2.0 * rng.random::<f64>() - 1.0) * jitter * cell;
                dy = (2.0 * rng.random::<f64>() - 1.0) * jitter * cell;
            }
            Point::new(c as f64 * cell + dx, r as f64 * cell + dy)
        };
        let corners: Vec<Vec<Point>> = (0..=rows)
            .map(|r| (0..=cols).map(|c| corner(r, c, &mut rng)).collect())
            .collect();
        let width = (rows * cols).to_string().len();
        let polygons: Vec<(String, MultiPolygon)> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| {
                let ring = vec![corners[r][c], corners[r][c + 1], corners[r + 1][c + 1], corners[r + 1][c]];
                (format!("t{:0width$}", r * cols + c), MultiPolygon::from(Polygon::new(ring)))
            })
            .collect();
        let graph = build_adjacency_from_polygons(&polygons, AdjacencyOptions::default())?;
        let (raw, covariates) = synthetic_covariates(&graph, cell, &mut rng_from(seed, &[1]))?;
        Ok(SyntheticCity {
            graph,
            polygons,
            raw,
            covariates,
        })
    }

    /// Population-share attribute in `[0, 1]` from the raw table.
    pub fn share(&self, column: &str) -> Result<Vec<f64>> {
        let c = self.raw.column(column)?;
        Ok((0..self.raw.rows.len())
            .map(|i| self.raw.value(i, c).unwrap_or(0.0))
            .collect())
    }
}

/// Demographic-like covariates: smooth fields sharing a common component,
/// plus node-level noise, mapped to plausible units.
fn synthetic_covariates<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    cell: f64,
    rng: &mut R,
) -> Result<(RawCovariates, CovariateTable)> {
    let n = graph.len();
    let pts: Vec<Point> = (0..n).map(|i| graph.centroid(i)).collect();
    let common = smooth_field(&pts, 4.0 * cell, 12.0 * cell, rng);
    let mut latent: Vec<Vec<f64>> = Vec::with_capacity(DEFAULT_FEATURES.len());
    for _ in 0..DEFAULT_FEATURES.len() {
        let own = smooth_field(&pts, 3.0 * cell, 10.0 * cell, rng);
        latent.push(
            (0..n)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(rng);
                    0.4 * common[i] + 0.8 * own[i] + 0.45 * z
                })
                .collect(),
        );
    }
    let sigmoid = crate::math::sigmoid;
    let population: Vec<f64> = latent[0].iter().map(|v| (8.0 + 0.5 * v).exp().round().max(1.0)).collect();
    let columns: Vec<String> = DEFAULT_FEATURES
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once("population".to_string()))
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            vec![
                population[i].ln(),
                36.0 + 5.0 * latent[1][i],
                (11.0 + 0.4 * latent[2][i]).exp(),
                sigmoid(-0.5 + 0.9 * latent[3][i]),
                sigmoid(0.3 + 1.2 * latent[4][i]),
                sigmoid(-0.2 + 1.0 * latent[5][i]),
                population[i],
            ]
        })
        .collect();
    let features: Vec<Vec<f64>> = rows.iter().map(|r| r[..DEFAULT_FEATURES.len()].to_vec()).collect();
    let table = standardize_matrix(DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(), &features)?
        .with_population(population)?;
    let raw = RawCovariates {
        node_ids: graph.node_ids().map(str::to_string).collect(),
        columns,
        rows: rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect(),
    };
    Ok((raw, table))
}

/// How ground truth is generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSettings {
    pub mode: ModelSpec,
    pub truth_sweeps: usize,
    /// Coefficients pinned instead of drawn: `(feature index, value)`.
    pub fixed_coeffs: Vec<(usize, f64)>,
}

impl Default for TrialSettings {
    fn default() -> Self {
        TrialSettings {
            mode: ModelSpec::Heterogeneous,
            truth_sweeps: DEFAULT_TRUTH_SWEEPS,
            fixed_coeffs: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedTrial {
    pub ising: IsingParams,
    pub reporting: ReportingParams,
    pub a: StateVector,
    pub t: ReportVector,
    pub psi: Vec<f64>,
}

/// Draws parameters from the priors, `A` by Swendsen-Wang, then reports.
pub fn generate_trial<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    covariates: &CovariateTable,
    settings: &TrialSettings,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<GeneratedTrial> {
    prior.validate()?;
    if settings.truth_sweeps == 0 {
        return Err(Error::InvalidConfig("truth_sweeps must be at least 1".into()));
    }
    let ising = prior.sample_ising(rng);
    let mut reporting = prior.sample_reporting(settings.mode, covariates.n_features(), rng);
    if let ReportingParams::Heterogeneous { coeffs, .. } = &mut reporting {
        for &(l, v) in &settings.fixed_coeffs {
            *coeffs
                .get_mut(l)
                .ok_or_else(|| Error::MissingFeature(format!("feature index {l}")))? = v;
        }
    }
    let mut a = StateVector::random(graph.len(), rng);
    SwendsenWang::new(graph).run(&mut a, &ising, settings.truth_sweeps, rng);
    let psi = match settings.mode {
        ModelSpec::Homogeneous => reporting_rates(&reporting, &CovariateTable::empty(graph.len()))?,
        ModelSpec::Heterogeneous => reporting_rates(&reporting, covariates)?,
    };
    let t = simulate_reports(&a, &psi, rng)?;
    Ok(GeneratedTrial {
        ising,
        reporting,
        a,
        t,
        psi,
    })
}

/// A model fitted in each trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    Homogeneous,
    Heterogeneous,
    Spatial,
    Gp,
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Homogeneous => "homogeneous",
            Predictor::Heterogeneous => "heterogeneous",
            Predictor::Spatial => "spatial",
            Predictor::Gp => "gp",
        }
    }
}

impl std::str::FromStr for Predictor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(Predictor::Homogeneous),
            "heterogeneous" => Ok(Predictor::Heterogeneous),
            "spatial" => Ok(Predictor::Spatial),
            "gp" => Ok(Predictor::Gp),
            other => Err(Error::parse("predictor", other)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub settings: TrialSettings,
    pub predictors: Vec<Predictor>,
    pub mcmc: McmcConfig,
    pub prior: PriorConfig,
    pub gp: GpConfig,
    pub seed: u64,
    /// Central interval levels recorded per parameter.
    pub levels: Vec<f64>,
    /// Keep per-node scores in each record.
    pub keep_scores: bool,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 1,
            settings: TrialSettings::default(),
            predictors: vec![
                Predictor::Heterogeneous,
                Predictor::Homogeneous,
                Predictor::Spatial,
                Predictor::Gp,
            ],
            mcmc: McmcConfig::default(),
            prior: PriorConfig::default(),
            gp: GpConfig::default(),
            seed: 0,
            levels: vec![0.5, 0.8, 0.9, 0.95],
            keep_scores: false,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub name: String,
    pub mean: f64,
    /// `(level, lo, hi)` per configured level.
    pub intervals: Vec<(f64, f64, f64)>,
    /// True value when the fitted and generating models share the parameter.
    pub truth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorResult {
    pub predictor: Predictor,
    /// `None` when the true labels are one-class after exclusion.
    pub auc: Option<f64>,
    pub rmse: Option<f64>,
    pub params: Vec<ParamEstimate>,
    pub max_rhat: Option<f64>,
    /// Retained samples all satisfy the clamping and support invariants.
    pub invariants_ok: bool,
    pub scores: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub theta0: f64,
    pub theta1: f64,
    pub reporting: ReportingParams,
    pub n_positive: usize,
    pub n_reported: usize,
    pub reported: Vec<usize>,
    pub results: Vec<PredictorResult>,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn result(&self, p: Predictor) -> Option<&PredictorResult> {
        self.results.iter().find(|r| r.predictor == p)
    }
}

fn truth_labels(generated: &GeneratedTrial, feature_names: &[String]) -> Vec<(String, f64)> {
    let mut v = vec![
        ("theta0".to_string(), generated.ising.theta0),
        ("theta1".to_string(), generated.ising.theta1),
    ];
    let labels = generated.reporting.labels(feature_names);
    v.extend(labels.into_iter().zip(generated.reporting.values()));
    v
}

fn run_trial(
    city_graph: &SpatialGraph,
    covariates: &CovariateTable,
    config: &ExperimentConfig,
    trial: usize,
) -> Result<TrialRecord> {
    let seed = derive_seed(config.seed, &[trial as u64]);
    let mut rng = rng_from(seed, &[0]);
    let generated = generate_trial(city_graph, covariates, &config.settings, &config.prior, &mut rng)?;
    let truths = truth_labels(&generated, &covariates.feature_names);
    let labels: Vec<bool> = (0..city_graph.len()).map(|i| generated.a.is_positive(i)).collect();
    let exclude: Vec<bool> = generated.t.values().to_vec();
    let empty = CovariateTable::empty(city_graph.len());
    let mut results = Vec::with_capacity(config.predictors.len());
    for (k, &p) in config.predictors.iter().enumerate() {
        let (scores, params, max_rhat, invariants_ok) = match p {
            Predictor::Homogeneous | Predictor::Heterogeneous => {
                let spec = if p == Predictor::Homogeneous {
                    ModelSpec::Homogeneous
                } else {
                    ModelSpec::Heterogeneous
                };
                let cov = if spec == ModelSpec::Homogeneous { &empty } else { covariates };
                let mcmc = McmcConfig {
                    seed: derive_seed(seed, &[1 + k as u64]),
                    ..config.mcmc.clone()
                };
                let data = FitData {
                    graph: city_graph,
                    covariates: cov,
                    reports: &generated.t,
                };
                let post = run_chains(data, spec, &config.prior, &mcmc)?;
                let ok = post.check_invariants(&generated.t).is_ok();
                let summary = summarize(&post);
                let params = (0..post.n_params())
                    .map(|j| ParamEstimate {
                        name: post.labels[j].clone(),
                        mean: summary.params[j].mean,
                        intervals: config
                            .levels
                            .iter()
                            .map(|&lvl| {
                                let (lo, hi) = post.interval(j, lvl);
                                (lvl, lo, hi)
                            })
                            .collect(),
                        truth: truths.iter().find(|(n, _)| *n == post.labels[j]).map(|(_, v)| *v),
                    })
                    .collect();
                (post.node_pr_a(), params, summary.max_rhat, ok)
            }
            Predictor::Spatial => (spatial_baseline(&generated.t, city_graph)?.scores, vec![], None, true),
            Predictor::Gp => {
                let pts: Vec<Point> = (0..city_graph.len()).map(|i| city_graph.centroid(i)).collect();
                (gp_baseline(&generated.t, &pts, &config.gp)?.prediction.scores, vec![], None, true)
            }
        };
        results.push(PredictorResult {
            predictor: p,
            auc: auc(&scores, &labels, &exclude).ok(),
            rmse: rmse(&scores, &labels, &exclude).ok(),
            params,
            max_rhat,
            invariants_ok,
            scores: config.keep_scores.then_some(scores),
        });
    }
    Ok(TrialRecord {
        trial,
        seed,
        theta0: generated.ising.theta0,
        theta1: generated.ising.theta1,
        reporting: generated.reporting.clone(),
        n_positive: generated.a.count_positive(),
        n_reported: generated.t.count(),
        reported: (0..generated.t.len()).filter(|&i| generated.t.get(i)).collect(),
        results,
        error: None,
    })
}

/// Runs `config.trials` independent trials. A failed trial is recorded with
/// its error and the experiment continues.
pub fn run_experiment(
    graph: &SpatialGraph,
    covariates: &CovariateTable,
    config: &ExperimentConfig,
) -> Result<Vec<TrialRecord>> {
    if config.trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    config.mcmc.validate()?;
    config.prior.validate()?;
    let one = |trial: usize| {
        run_trial(graph, covariates, config, trial).unwrap_or_else(|e| TrialRecord {
            trial,
            seed: derive_seed(config.seed, &[trial as u64]),
            theta0: f64::NAN,
            theta1: f64::NAN,
            reporting: ReportingParams::Homogeneous { alpha: f64::NAN },
            n_positive: 0,
            n_reported: 0,
            reported: Vec::new(),
            results: Vec::new(),
            error: Some(e.to_string()),
        })
    };
    Ok(if config.parallel {
        (0..config.trials).into_par_iter().map(one).collect()
    } else {
        (0..config.trials).map(one).collect()
    })
}

/// Mean AUC of `p` over trials where it is defined, with the count used.
pub fn mean_auc(records: &[TrialRecord], p: Predictor) -> (f64, usize) {
    let v: Vec<f64> = records
        .iter()
        .filter_map(|r| r.result(p).and_then(|x| x.auc))
        .collect();
    (crate::math::mean(&v), v.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn city_is_rook_lattice() {
        let city = SyntheticCity::jittered_grid(4, 5, 100.0, 0.3, 1).unwrap();
        assert_eq!(city.graph.len(), 20);
        assert_eq!(city.graph.edges().len(), 4 * 4 + 3 * 5);
        assert!(city.graph.is_connected());
        assert_eq!(city.covariates.n_features(), 6);
        let share = city.share("white_share").unwrap();
        assert!(share.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn decoupled_truth_and_no_false_positives() {
        let city = SyntheticCity::jittered_grid(5, 5, 100.0, 0.2, 2).unwrap();
        let prior = PriorConfig::default();
        let mut rng = rng_from(3, &[]);
        for _ in 0..20 {
            let g = generate_trial(&city.graph, &city.covariates, &TrialSettings::default(), &prior, &mut rng).unwrap();
            assert!(g.t.first_false_positive(&g.a).is_none());
            assert!(g.ising.theta1 >= 0.0);
        }
        let homo = TrialSettings {
            mode: ModelSpec::Homogeneous,
            ..Default::default()
        };
        let g = generate_trial(&city.graph, &city.covariates, &homo, &prior, &mut rng).unwrap();
        assert!(matches!(g.reporting, ReportingParams::Homogeneous { .. }));
    }

    #[test]
    fn single_trial_experiment() {
        let city = SyntheticCity::jittered_grid(4, 4, 100.0, 0.2, 5).unwrap();
        let config = ExperimentConfig {
            trials: 1,
            predictors: vec![Predictor::Homogeneous],
            mcmc: McmcConfig {
                chains: 2,
                total_iterations: 60,
                burn_in: 20,
                sw_burnin: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = run_experiment(&city.graph, &city.covariates, &config).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].error.is_none(), "{:?}", r[0].error);
        assert_eq!(r[0].results.len(), 1);
        assert!(r[0].results[0].invariants_ok);
        let again = run_experiment(&city.graph, &city.covariates, &config).unwrap();
        assert_eq!(r, again);
    }
}
