use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use toml::Value;

use underreport::covariates::DEFAULT_FEATURES;
use underreport::graph::geojson::write_features;
use underreport::inference::io::{write_chain_csv, write_states};
use underreport::inference::{node_posterior, run_chains, summarize, FitData};
use underreport::{CovariateTable, McmcConfig, ModelSpec, PriorConfig};

use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::io::{load_dataset, load_graph, load_graph_features, write_scores};
use crate::manifest::Run;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    /// Probability of a report at the node.
    PrT,
    /// Probability of an event at the node.
    PrA,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub out: PathBuf,
    pub graph: PathBuf,
    pub dataset: PathBuf,
    pub model: ModelSpec,
    /// Dataset columns used by the heterogeneous model.
    pub features: Vec<String>,
    /// Column written to `scores.csv`.
    pub score: Score,
    pub prior: PriorConfig,
    pub mcmc: McmcConfig,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            out: "fit".into(),
            graph: "graph".into(),
            dataset: "dataset/dataset.csv".into(),
            model: ModelSpec::Heterogeneous,
            features: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
            score: Score::PrT,
            prior: PriorConfig::default(),
            mcmc: McmcConfig::default(),
        }
    }
}

settings_out!(FitSettings);

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("fit", file, sets, flags, execute)
}

fn execute(s: &FitSettings, run: &mut Run) -> CliResult<()> {
    let graph = load_graph(run, &s.graph)?;
    let data = load_dataset(run, &s.dataset, &graph)?;
    let covariates = match s.model {
        ModelSpec::Homogeneous => CovariateTable::empty(graph.len()),
        ModelSpec::Heterogeneous => data.covariates(&s.features)?,
    };
    let fit = FitData {
        graph: &graph,
        covariates: &covariates,
        reports: &data.train,
    };
    let post = run_chains(fit, s.model, &s.prior, &s.mcmc)?;
    post.check_invariants(&data.train)?;

    let reporting_labels = &post.labels[2..];
    for chain in &post.chains {
        write_chain_csv(run.create(&format!("chain_{}.csv", chain.chain))?, chain, reporting_labels)?;
        if s.mcmc.store_states {
            write_states(run.create(&format!("states_{}.bin", chain.chain))?, &chain.states)?;
        }
    }
    run.write_json("summary.json", &summarize(&post))?;

    let nodes = node_posterior(&post);
    let mut w = csv::Writer::from_writer(run.create("node_posterior.csv")?);
    w.write_record(["node_id", "pr_a", "psi", "pr_t", "train"])?;
    for i in 0..graph.len() {
        w.write_record([
            graph.node_id(i).to_string(),
            nodes.pr_a[i].to_string(),
            nodes.psi[i].to_string(),
            nodes.pr_t[i].to_string(),
            u8::from(data.train.get(i)).to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);

    let scores = match s.score {
        Score::PrT => &nodes.pr_t,
        Score::PrA => &nodes.pr_a,
    };
    write_scores(run, "scores.csv", &graph, scores)?;

    if let Some(mut features) = load_graph_features(run, &s.graph)? {
        for f in &mut features {
            let i = graph
                .index_of(&f.id)
                .ok_or_else(|| CliError::new("unknown_node", format!("polygon `{}` is not in the graph", f.id)))?;
            for (key, v) in [("pr_a", nodes.pr_a[i]), ("psi", nodes.psi[i]), ("pr_t", nodes.pr_t[i])] {
                f.properties.insert(key.into(), Json::from(v));
            }
        }
        write_features(run.create("posterior.geojson")?, &features)?;
    }
    Ok(())
}
