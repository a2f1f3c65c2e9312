use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use underreport::covariates::{standardize_covariates, DEFAULT_FEATURES};
use underreport::evaluation::{bootstrap_mean_difference, DeltaReport, DEFAULT_ITERATES};
use underreport::synthetic::{mean_auc, run_experiment, ExperimentConfig, SyntheticCity, TrialRecord};
use underreport::{CovariateTable, RawCovariates, SpatialGraph};

use super::graph::SyntheticSettings;
use super::{drive, settings_out};
use crate::error::CliResult;
use crate::io::{load_graph, ID_PROPERTY};
use crate::manifest::Run;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub out: PathBuf,
    /// Synthetic city used when `graph` is unset.
    pub city: SyntheticSettings,
    pub city_seed: u64,
    /// Directory written by `build-graph`; requires `covariates`.
    pub graph: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub id_column: String,
    pub features: Vec<String>,
    pub population_column: Option<String>,
    pub experiment: ExperimentConfig,
    /// Bootstrap iterates for the per-trial AUC comparisons.
    pub iterates: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            out: "simulation".into(),
            city: SyntheticSettings::default(),
            city_seed: 1,
            graph: None,
            covariates: None,
            id_column: ID_PROPERTY.into(),
            features: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
            population_column: Some("population".into()),
            experiment: ExperimentConfig::default(),
            iterates: DEFAULT_ITERATES,
        }
    }
}

settings_out!(SimulateSettings);

#[derive(Serialize)]
struct PairedAuc {
    model: String,
    against: String,
    trials: usize,
    #[serde(flatten)]
    delta: DeltaReport,
}

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("simulate", file, sets, flags, execute)
}

fn setting(s: &SimulateSettings, run: &mut Run) -> CliResult<(SpatialGraph, CovariateTable)> {
    match (&s.graph, &s.covariates) {
        (Some(dir), Some(cov)) => {
            let graph = load_graph(run, dir)?;
            let raw = RawCovariates::read_csv(run.read(cov)?.as_slice(), &s.id_column)?.for_graph(&graph)?;
            let table = standardize_covariates(&raw, &s.features, s.population_column.as_deref())?;
            Ok((graph, table))
        }
        (Some(_), None) => Err(crate::error::CliError::config("`graph` needs `covariates`")),
        _ => {
            let c = &s.city;
            let city = SyntheticCity::jittered_grid(c.rows, c.cols, c.cell, c.jitter, s.city_seed)?;
            Ok((city.graph, city.covariates))
        }
    }
}

fn execute(s: &SimulateSettings, run: &mut Run) -> CliResult<()> {
    let (graph, covariates) = setting(s, run)?;
    let records = run_experiment(&graph, &covariates, &s.experiment)?;

    let mut w = run.create("trials.ndjson")?;
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    drop(w);

    let mut w = csv::Writer::from_writer(run.create("auc.csv")?);
    w.write_record(["trial", "predictor", "auc", "rmse", "max_rhat"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &records {
        for p in &r.results {
            w.write_record([r.trial.to_string(), p.predictor.name().into(), opt(p.auc), opt(p.rmse), opt(p.max_rhat)])?;
        }
    }
    w.flush()?;
    drop(w);

    let preds = &s.experiment.predictors;
    let mut comparisons = Vec::new();
    if let Some((&first, rest)) = preds.split_first() {
        for &other in rest {
            let (a, b): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter_map(|r| Some((r.result(first)?.auc?, r.result(other)?.auc?)))
                .unzip();
            if a.len() >= 2 {
                comparisons.push(PairedAuc {
                    model: first.name().into(),
                    against: other.name().into(),
                    trials: a.len(),
                    delta: bootstrap_mean_difference(&a, &b, s.iterates, s.experiment.seed)?,
                });
            }
        }
    }
    let means: serde_json::Map<String, serde_json::Value> = preds
        .iter()
        .map(|&p| {
            let (m, n) = mean_auc(&records, p);
            (p.name().to_string(), serde_json::json!({ "mean_auc": m, "trials": n }))
        })
        .collect();
    run.write_json(
        "comparisons.json",
        &serde_json::json!({
            "trials": records.len(),
            "failed_trials": records.iter().filter(|r| r.error.is_some()).count(),
            "invariant_violations": records.iter().flat_map(|r| &r.results).filter(|p| !p.invariants_ok).count(),
            "predictors": means,
            "paired_auc": comparisons,
        }),
    )
}

/// Trials from a `trials.ndjson` file; failed trials are skipped.
pub fn read_trials(bytes: &[u8]) -> CliResult<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for line in bytes.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
        let v: serde_json::Value = serde_json::from_slice(line)?;
        if !v.get("error").map_or(true, serde_json::Value::is_null) {
            continue;
        }
        out.push(serde_json::from_value(v)?);
    }
    Ok(out)
}
