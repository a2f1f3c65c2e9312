use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::FixedOffset;
use serde::{Deserialize, Serialize};
use toml::Value;

use underreport::covariates::{standardize_covariates, DEFAULT_FEATURES};
use underreport::dataset::{
    build_dataset, parse_timestamp, read_reports_csv, write_dataset_csv, CutoffRule, DatasetOptions, ReportColumns,
};
use underreport::RawCovariates;

use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::io::{load_graph, load_graph_features, polygons, ID_PROPERTY};
use crate::manifest::Run;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    pub out: PathBuf,
    /// Directory written by `build-graph`.
    pub graph: PathBuf,
    pub reports: Option<PathBuf>,
    pub columns: ReportColumns,
    /// Offset applied to timestamps without one, e.g. `"-05:00"`.
    pub utc_offset: String,
    /// Share of nodes that must have reported by the cutoff.
    pub cutoff_fraction: f64,
    /// Explicit cutoff; overrides `cutoff_fraction`.
    pub cutoff_timestamp: Option<String>,
    pub window_start: Option<String>,
    pub window_end: Option<String>,
    /// Raw covariate CSV keyed by node id.
    pub covariates: Option<PathBuf>,
    pub id_column: String,
    pub features: Vec<String>,
    pub population_column: Option<String>,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        DatasetSettings {
            out: "dataset".into(),
            graph: "graph".into(),
            reports: None,
            columns: ReportColumns::default(),
            utc_offset: "+00:00".into(),
            cutoff_fraction: 0.08,
            cutoff_timestamp: None,
            window_start: None,
            window_end: None,
            covariates: None,
            id_column: ID_PROPERTY.into(),
            features: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
            population_column: None,
        }
    }
}

settings_out!(DatasetSettings);

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("build-dataset", file, sets, flags, execute)
}

fn execute(s: &DatasetSettings, run: &mut Run) -> CliResult<()> {
    let offset = FixedOffset::from_str(&s.utc_offset)
        .map_err(|e| CliError::config(format!("utc_offset `{}`: {e}", s.utc_offset)))?;
    let reports_path = s.reports.as_deref().ok_or_else(|| CliError::config("`reports` is required"))?;
    let graph = load_graph(run, &s.graph)?;
    let features = load_graph_features(run, &s.graph)?;
    let shapes = features.as_deref().map(polygons);
    let records = read_reports_csv(run.read(reports_path)?.as_slice(), &s.columns, offset)?;

    let rule = match &s.cutoff_timestamp {
        Some(t) => CutoffRule::Timestamp(parse_timestamp(t, offset)?),
        None => CutoffRule::Fraction(s.cutoff_fraction),
    };
    let window = match (&s.window_start, &s.window_end) {
        (Some(a), Some(b)) => Some((parse_timestamp(a, offset)?, parse_timestamp(b, offset)?)),
        (None, None) => None,
        _ => return Err(CliError::config("window_start and window_end go together")),
    };
    let data = build_dataset(&records, &graph, shapes.as_deref(), &DatasetOptions { rule, window })?;

    let covariates = match &s.covariates {
        Some(p) => {
            let raw = RawCovariates::read_csv(run.read(p)?.as_slice(), &s.id_column)?.for_graph(&graph)?;
            Some(standardize_covariates(&raw, &s.features, s.population_column.as_deref())?)
        }
        None => None,
    };
    write_dataset_csv(run.create("dataset.csv")?, &data.node_ids, &data.train, &data.test, covariates.as_ref())?;
    run.write_json(
        "dataset_summary.json",
        &serde_json::json!({
            "nodes": graph.len(),
            "reports": records.len(),
            "train_nodes": data.train.count(),
            "test_nodes": data.test.count(),
            "cutoff": data.cutoff.map(|t| t.to_rfc3339()),
            "dropped_ids": data.dropped_ids,
            "dropped_reports": data.dropped_reports,
            "uncontained_points": data.uncontained_points,
            "out_of_window": data.out_of_window,
            "features": covariates.as_ref().map(|c| c.feature_names.clone()).unwrap_or_default(),
            "warnings": data.warnings,
        }),
    )
}
