use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use underreport::baselines::{gp_baseline, spatial_baseline, GpConfig};
use underreport::evaluation::{bootstrap_compare, bootstrap_metrics, Comparison, MetricReport, DEFAULT_ITERATES};
use underreport::graph::Point;

use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::io::{load_dataset, load_graph, read_scores, write_scores};
use crate::manifest::Run;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSettings {
    pub out: PathBuf,
    pub graph: PathBuf,
    pub dataset: PathBuf,
    /// `name=path` pairs naming `node_id,score` CSVs.
    pub predictions: Vec<String>,
    /// Any of `spatial` and `gp`, fitted to the training reports.
    pub baselines: Vec<String>,
    pub gp: GpConfig,
    pub iterates: usize,
    pub seed: u64,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        EvaluateSettings {
            out: "evaluation".into(),
            graph: "graph".into(),
            dataset: "dataset/dataset.csv".into(),
            predictions: Vec::new(),
            baselines: vec!["spatial".into(), "gp".into()],
            gp: GpConfig::default(),
            iterates: DEFAULT_ITERATES,
            seed: 0,
        }
    }
}

settings_out!(EvaluateSettings);

#[derive(Serialize)]
struct ModelMetrics {
    model: String,
    auc: MetricReport,
    rmse: MetricReport,
}

#[derive(Serialize)]
struct PairComparison {
    model: String,
    against: String,
    #[serde(flatten)]
    comparison: Comparison,
}

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("evaluate", file, sets, flags, execute)
}

fn execute(s: &EvaluateSettings, run: &mut Run) -> CliResult<()> {
    let graph = load_graph(run, &s.graph)?;
    let data = load_dataset(run, &s.dataset, &graph)?;
    let mut models: Vec<(String, Vec<f64>)> = Vec::new();
    for p in &s.predictions {
        let (name, path) = p
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("prediction `{p}` is not NAME=PATH")))?;
        models.push((name.to_string(), read_scores(run, Path::new(path), &graph)?));
    }
    let n_predictions = models.len();
    for b in &s.baselines {
        let scores = match b.as_str() {
            "spatial" => spatial_baseline(&data.train, &graph)?.scores,
            "gp" => {
                let pts: Vec<Point> = (0..graph.len()).map(|i| graph.centroid(i)).collect();
                gp_baseline(&data.train, &pts, &s.gp)?.prediction.scores
            }
            other => return Err(CliError::config(format!("unknown baseline `{other}`"))),
        };
        write_scores(run, &format!("baseline_{b}.csv"), &graph, &scores)?;
        models.push((b.clone(), scores));
    }
    if models.is_empty() {
        return Err(CliError::config("nothing to evaluate"));
    }

    let labels = data.test.values();
    let exclude = data.train.values();
    let mut metrics = Vec::with_capacity(models.len());
    for (name, scores) in &models {
        let (auc, rmse) = bootstrap_metrics(scores, labels, exclude, s.iterates, s.seed)?;
        metrics.push(ModelMetrics {
            model: name.clone(),
            auc,
            rmse,
        });
    }
    let mut comparisons = Vec::new();
    for (name, a) in &models[..n_predictions] {
        for (other, b) in &models[n_predictions..] {
            comparisons.push(PairComparison {
                model: name.clone(),
                against: other.clone(),
                comparison: bootstrap_compare(a, b, labels, exclude, s.iterates, s.seed)?,
            });
        }
    }

    let mut w = csv::Writer::from_writer(run.create("metrics.csv")?);
    w.write_record(["model", "metric", "estimate", "lo95", "hi95"])?;
    for m in &metrics {
        for r in [&m.auc, &m.rmse] {
            w.write_record([&m.model, &r.metric, &r.estimate.to_string(), &r.lo95.to_string(), &r.hi95.to_string()])?;
        }
    }
    w.flush()?;
    drop(w);
    run.write_json(
        "metrics.json",
        &serde_json::json!({
            "test_positive": data.test.count(),
            "excluded": data.train.count(),
            "metrics": metrics,
            "comparisons": comparisons,
        }),
    )
}
