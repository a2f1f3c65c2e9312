pub mod allocate;
pub mod calibrate;
pub mod dataset;
pub mod evaluate;
pub mod fetch;
pub mod fit;
pub mod graph;
pub mod pool;
pub mod simulate;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::Value;

use crate::config::{resolve, to_table};
use crate::error::CliResult;
use crate::manifest::Run;

/// A command's settings; `out` is where its outputs and manifest go.
pub trait Settings: DeserializeOwned + Serialize + Default {
    fn out(&self) -> &Path;
}

/// Resolves settings, then runs `body` between the opening and closing
/// manifest writes.
pub fn drive<T: Settings>(
    command: &'static str,
    file: Option<&Path>,
    sets: &[String],
    flags: Vec<(&str, Value)>,
    body: fn(&T, &mut Run) -> CliResult<()>,
) -> CliResult<()> {
    let settings: T = resolve(file, command, sets, flags)?;
    let mut run = Run::start(command, settings.out(), to_table(&settings)?)?;
    let outcome = body(&settings, &mut run);
    run.finish(&outcome)?;
    outcome
}

macro_rules! settings_out {
    ($t:ty) => {
        impl crate::commands::Settings for $t {
            fn out(&self) -> &std::path::Path {
                &self.out
            }
        }
    };
}
pub(crate) use settings_out;
