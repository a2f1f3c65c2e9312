//! `underreport`: build graphs and datasets, fit the model, evaluate,
//! pool across events, allocate resources and run simulation studies.

mod commands;
mod config;
mod error;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "underreport", version, about = "Infer under-reported spatial events from positive-only reports")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config file, or a manifest from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set mcmc.chains=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, Value)> {
        let mut v = Vec::new();
        if let Some(o) = &self.out {
            v.push(("out", Value::String(o.display().to_string())));
        }
        v
    }
}

fn push_str(v: &mut Vec<(&'static str, Value)>, key: &'static str, x: &Option<String>) {
    if let Some(x) = x {
        v.push((key, Value::String(x.clone())));
    }
}

fn push_path(v: &mut Vec<(&'static str, Value)>, key: &'static str, x: &Option<PathBuf>) {
    if let Some(x) = x {
        v.push((key, Value::String(x.display().to_string())));
    }
}

fn push_seed(v: &mut Vec<(&'static str, Value)>, key: &'static str, x: Option<u64>) {
    if let Some(x) = x {
        v.push((key, Value::Integer(x as i64)));
    }
}

fn push_int(v: &mut Vec<(&'static str, Value)>, key: &'static str, x: Option<usize>) {
    if let Some(x) = x {
        v.push((key, Value::Integer(x as i64)));
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the node graph from polygons, a geohash grid or a synthetic city.
    BuildGraph {
        /// `geojson`, `geohash` or `synthetic`.
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Split timestamped reports into training and test node labels.
    BuildDataset {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        reports: Option<PathBuf>,
        #[arg(long)]
        covariates: Option<PathBuf>,
        #[arg(long)]
        cutoff_fraction: Option<f64>,
    },
    /// Run a semi-synthetic experiment.
    Simulate {
        #[arg(long)]
        trials: Option<usize>,
        /// Generating reporting model.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the model to a dataset.
    Fit {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score predictions against held-out reports, with baselines.
    Evaluate {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// `name=path` to a node_id,score CSV. Repeatable.
        #[arg(long = "prediction")]
        predictions: Vec<String>,
        /// Bootstrap seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pool shared coefficients across fitted events.
    Pool {
        /// Fit output directory. Repeatable.
        #[arg(long = "event")]
        events: Vec<PathBuf>,
    },
    /// Allocate resources to the top-k nodes and measure who is served.
    Allocate {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Raw covariate CSV with population and attribute shares.
        #[arg(long)]
        covariates: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Number of nodes to serve. Repeatable.
        #[arg(long)]
        k: Vec<usize>,
    },
    /// Interval coverage and parameter recovery from simulation trials.
    Calibrate {
        /// `trials.ndjson` written by `simulate`.
        #[arg(long)]
        trials: Option<PathBuf>,
    },
    /// Download a file once into an on-disk cache.
    Fetch {
        #[arg(long)]
        url: Option<String>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let mut flags = common.flags();
    let f = &mut flags;
    let config = common.config.as_deref();
    let sets = &common.sets;
    match cli.command {
        Command::BuildGraph { source, geometry, seed } => {
            push_str(f, "source", &source);
            push_seed(f, "seed", seed);
            push_path(f, "geometry", &geometry);
            commands::graph::run(config, sets, flags)
        }
        Command::BuildDataset {
            graph,
            reports,
            covariates,
            cutoff_fraction,
        } => {
            push_path(f, "graph", &graph);
            push_path(f, "reports", &reports);
            push_path(f, "covariates", &covariates);
            if let Some(c) = cutoff_fraction {
                f.push(("cutoff_fraction", Value::Float(c)));
            }
            commands::dataset::run(config, sets, flags)
        }
        Command::Simulate { trials, mode, seed } => {
            push_int(f, "experiment.trials", trials);
            push_str(f, "experiment.settings.mode", &mode);
            push_seed(f, "experiment.seed", seed);
            commands::simulate::run(config, sets, flags)
        }
        Command::Fit {
            graph,
            dataset,
            model,
            chains,
            iterations,
            seed,
        } => {
            push_seed(f, "mcmc.seed", seed);
            push_path(f, "graph", &graph);
            push_path(f, "dataset", &dataset);
            push_str(f, "model", &model);
            push_int(f, "mcmc.chains", chains);
            push_int(f, "mcmc.total_iterations", iterations);
            commands::fit::run(config, sets, flags)
        }
        Command::Evaluate {
            graph,
            dataset,
            predictions,
            seed,
        } => {
            push_seed(f, "seed", seed);
            push_path(f, "graph", &graph);
            push_path(f, "dataset", &dataset);
            if !predictions.is_empty() {
                f.push(("predictions", Value::Array(predictions.into_iter().map(Value::String).collect())));
            }
            commands::evaluate::run(config, sets, flags)
        }
        Command::Pool { events } => {
            if !events.is_empty() {
                let v = events.iter().map(|p| Value::String(p.display().to_string())).collect();
                f.push(("events", Value::Array(v)));
            }
            commands::pool::run(config, sets, flags)
        }
        Command::Allocate {
            graph,
            scores,
            covariates,
            dataset,
            k,
        } => {
            push_path(f, "graph", &graph);
            push_path(f, "scores", &scores);
            push_path(f, "covariates", &covariates);
            push_path(f, "dataset", &dataset);
            if !k.is_empty() {
                f.push(("k", Value::Array(k.into_iter().map(|x| Value::Integer(x as i64)).collect())));
            }
            commands::allocate::run(config, sets, flags)
        }
        Command::Calibrate { trials } => {
            push_path(f, "trials", &trials);
            commands::calibrate::run(config, sets, flags)
        }
        Command::Fetch { url, cache_dir } => {
            push_str(f, "url", &url);
            push_path(f, "cache_dir", &cache_dir);
            commands::fetch::run(config, sets, flags)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.to_string().trim().to_string());
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
