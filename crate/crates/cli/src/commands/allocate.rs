use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use underreport::evaluation::{allocate_topk, Demographics};
use underreport::RawCovariates;

use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::io::{load_dataset, load_graph, read_scores, ID_PROPERTY};
use crate::manifest::Run;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eligible {
    All,
    /// Nodes without a training report; needs `dataset`.
    Unreported,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocateSettings {
    pub out: PathBuf,
    pub graph: PathBuf,
    pub scores: PathBuf,
    /// Raw covariate CSV with population and attribute share columns.
    pub covariates: PathBuf,
    pub id_column: String,
    pub population_column: String,
    /// Share columns in `[0, 1]` whose served fraction is reported.
    pub attributes: Vec<String>,
    pub k: Vec<usize>,
    pub eligible: Eligible,
    pub dataset: Option<PathBuf>,
}

impl Default for AllocateSettings {
    fn default() -> Self {
        AllocateSettings {
            out: "allocation".into(),
            graph: "graph".into(),
            scores: "fit/scores.csv".into(),
            covariates: "graph/covariates.csv".into(),
            id_column: ID_PROPERTY.into(),
            population_column: "population".into(),
            attributes: vec!["white_share".into()],
            k: vec![100],
            eligible: Eligible::All,
            dataset: None,
        }
    }
}

settings_out!(AllocateSettings);

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("allocate", file, sets, flags, execute)
}

fn execute(s: &AllocateSettings, run: &mut Run) -> CliResult<()> {
    let graph = load_graph(run, &s.graph)?;
    let scores = read_scores(run, &s.scores, &graph)?;
    let raw = RawCovariates::read_csv(run.read(&s.covariates)?.as_slice(), &s.id_column)?.for_graph(&graph)?;
    let column = |name: &str| -> CliResult<Vec<f64>> {
        let c = raw.column(name)?;
        (0..graph.len())
            .map(|i| {
                raw.value(i, c).ok_or_else(|| {
                    CliError::new("missing_feature", format!("`{name}` is missing for node `{}`", graph.node_id(i)))
                })
            })
            .collect()
    };
    let demo = Demographics {
        population: column(&s.population_column)?,
        names: s.attributes.clone(),
        shares: s.attributes.iter().map(|a| column(a)).collect::<CliResult<_>>()?,
    };
    let eligible = match s.eligible {
        Eligible::All => vec![true; graph.len()],
        Eligible::Unreported => {
            let path = s
                .dataset
                .as_deref()
                .ok_or_else(|| CliError::config("eligible = \"unreported\" needs `dataset`"))?;
            load_dataset(run, path, &graph)?.train.values().iter().map(|&t| !t).collect()
        }
    };
    if s.k.is_empty() {
        return Err(CliError::config("`k` is empty"));
    }
    let results = s
        .k
        .iter()
        .map(|&k| allocate_topk(&scores, &eligible, k, &demo))
        .collect::<Result<Vec<_>, _>>()?;

    let mut w = csv::Writer::from_writer(run.create("allocation.csv")?);
    w.write_record(["k", "node_id", "rank", "weight"])?;
    for r in &results {
        for sel in &r.selected {
            w.write_record([
                r.k.to_string(),
                graph.node_id(sel.node).to_string(),
                sel.rank.to_string(),
                sel.weight.to_string(),
            ])?;
        }
    }
    w.flush()?;
    drop(w);

    let mut w = csv::Writer::from_writer(run.create("equity.csv")?);
    w.write_record(["k", "attribute", "served", "base_rate"])?;
    for r in &results {
        for (a, name) in r.attributes.iter().enumerate() {
            w.write_record([r.k.to_string(), name.clone(), r.served[a].to_string(), r.base_rate[a].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
