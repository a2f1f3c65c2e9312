use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use underreport::inference::io::read_chain_csv;
use underreport::observation::pooled_reporting_rates;
use underreport::pooling::{pooled_summary_table, EventDraws, PoolGrid};

use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::io::{load_dataset, load_graph};
use crate::manifest::Run;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSettings {
    pub out: PathBuf,
    /// Output directories of `fit`, one per event.
    pub events: Vec<PathBuf>,
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub grid: PoolGrid,
    /// With `dataset`, writes reporting rates from the pooled coefficients.
    pub graph: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
}

impl Default for PoolSettings {
    fn default() -> Self {
        PoolSettings {
            out: "pooled".into(),
            events: Vec::new(),
            prior_mean: 0.0,
            prior_sd: 0.5,
            grid: PoolGrid::default(),
            graph: None,
            dataset: None,
        }
    }
}

settings_out!(PoolSettings);

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("pool", file, sets, flags, execute)
}

/// Chain files of one fit, in chain order.
fn chain_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<(usize, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| CliError::new("io", format!("reading {}: {e}", dir.display())))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            let name = path.file_name()?.to_str()?;
            let k = name.strip_prefix("chain_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((k, path))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::new("io", format!("{} has no chain_*.csv files", dir.display())));
    }
    Ok(files.into_iter().map(|(_, p)| p).collect())
}

fn event_draws(run: &mut Run, dir: &Path) -> CliResult<EventDraws> {
    let mut labels: Option<Vec<String>> = None;
    let mut draws: Vec<Vec<f64>> = Vec::new();
    for path in chain_files(dir)? {
        let table = read_chain_csv(run.read(&path)?.as_slice())?;
        match &labels {
            None => {
                draws = table.columns;
                labels = Some(table.labels);
            }
            Some(l) if *l == table.labels => {
                for (d, c) in draws.iter_mut().zip(table.columns) {
                    d.extend(c);
                }
            }
            Some(_) => {
                return Err(CliError::new(
                    "label_mismatch",
                    format!("{} disagrees with the other chains", path.display()),
                ))
            }
        }
    }
    Ok(EventDraws {
        event: dir.display().to_string(),
        labels: labels.unwrap_or_default(),
        draws,
    })
}

fn execute(s: &PoolSettings, run: &mut Run) -> CliResult<()> {
    if s.events.is_empty() {
        return Err(CliError::config("`events` lists no fit directories"));
    }
    let events = s
        .events
        .iter()
        .map(|d| event_draws(run, d))
        .collect::<CliResult<Vec<_>>>()?;
    let pooled = pooled_summary_table(&events, s.prior_mean, s.prior_sd, s.grid)?;

    let mut w = csv::Writer::from_writer(run.create("pooled.csv")?);
    w.write_record(["label", "mean", "sd", "median", "lo95", "hi95", "events"])?;
    for p in &pooled {
        w.write_record([
            p.label.clone(),
            p.mean.to_string(),
            p.sd.to_string(),
            p.median.to_string(),
            p.lo95.to_string(),
            p.hi95.to_string(),
            p.inputs.len().to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);

    let mut w = csv::Writer::from_writer(run.create("pooled_density.csv")?);
    w.write_record(["label", "x", "density"])?;
    for p in &pooled {
        for (x, d) in p.grid.iter().zip(&p.density) {
            w.write_record([p.label.as_str(), &x.to_string(), &d.to_string()])?;
        }
    }
    w.flush()?;
    drop(w);

    if let (Some(graph_dir), Some(dataset)) = (&s.graph, &s.dataset) {
        let graph = load_graph(run, graph_dir)?;
        let data = load_dataset(run, dataset, &graph)?;
        let features: Vec<String> = pooled
            .iter()
            .map(|p| p.label.strip_prefix("alpha_").unwrap_or(&p.label).to_string())
            .collect();
        let coeffs: Vec<f64> = pooled.iter().map(|p| p.mean).collect();
        let psi = pooled_reporting_rates(&coeffs, &data.covariates(&features)?)?;
        let mut w = csv::Writer::from_writer(run.create("pooled_psi.csv")?);
        w.write_record(["node_id", "psi"])?;
        for (i, v) in psi.iter().enumerate() {
            w.write_record([graph.node_id(i), &v.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}
