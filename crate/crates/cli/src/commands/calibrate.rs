use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use underreport::evaluation::{calibration_curve, identifiability, IntervalRecord};
use underreport::synthetic::Predictor;

use super::simulate::read_trials;
use super::{drive, settings_out};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

/// Group name for the reporting parameters when pooled.
pub const REPORTING_GROUP: &str = "reporting";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSettings {
    pub out: PathBuf,
    /// `trials.ndjson` written by `simulate`.
    pub trials: PathBuf,
    pub predictor: Predictor,
    /// Also report coverage over all reporting parameters together.
    pub pool_reporting: bool,
}

impl Default for CalibrateSettings {
    fn default() -> Self {
        CalibrateSettings {
            out: "calibration".into(),
            trials: "simulation/trials.ndjson".into(),
            predictor: Predictor::Heterogeneous,
            pool_reporting: true,
        }
    }
}

settings_out!(CalibrateSettings);

pub fn run(file: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> CliResult<()> {
    drive("calibrate", file, sets, flags, execute)
}

fn execute(s: &CalibrateSettings, run: &mut Run) -> CliResult<()> {
    let trials = read_trials(&run.read(&s.trials)?)?;
    let mut intervals = Vec::new();
    let mut estimates = Vec::new();
    for t in &trials {
        let Some(result) = t.result(s.predictor) else { continue };
        for p in &result.params {
            let Some(truth) = p.truth else { continue };
            estimates.push((p.name.clone(), truth, p.mean));
            for &(level, lo, hi) in &p.intervals {
                intervals.push(IntervalRecord {
                    parameter: p.name.clone(),
                    level,
                    lo,
                    hi,
                    truth,
                });
            }
        }
    }
    if intervals.is_empty() {
        return Err(CliError::new(
            "empty_after_exclusion",
            format!("no `{}` parameter estimates with known truth", s.predictor.name()),
        ));
    }
    let mut rows = calibration_curve(&intervals);
    if s.pool_reporting {
        let pooled: Vec<IntervalRecord> = intervals
            .iter()
            .filter(|r| r.parameter != "theta0" && r.parameter != "theta1")
            .map(|r| IntervalRecord {
                parameter: REPORTING_GROUP.into(),
                ..r.clone()
            })
            .collect();
        rows.extend(calibration_curve(&pooled));
    }

    let mut w = csv::Writer::from_writer(run.create("calibration.csv")?);
    w.write_record(["parameter", "level", "coverage", "trials", "insufficient"])?;
    for r in &rows {
        w.write_record([
            r.parameter.clone(),
            r.level.to_string(),
            r.coverage.to_string(),
            r.trials.to_string(),
            r.insufficient.to_string(),
        ])?;
    }
    w.flush()?;
    drop(w);

    let mut w = csv::Writer::from_writer(run.create("identifiability.csv")?);
    w.write_record(["parameter", "correlation", "trials"])?;
    for r in identifiability(&estimates)? {
        w.write_record([r.parameter, r.correlation.to_string(), r.trials.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
