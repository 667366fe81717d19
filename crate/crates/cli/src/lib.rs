//! Configuration-driven experiments on the Kac system coupled to a finite
//! reservoir or a Maxwellian thermostat. See the crate README for the
//! config format and the meaning of each experiment.

pub mod config;
pub mod experiments;

use config::{Config, ConfigError};
use experiments::ExperimentKind;
use kac_core::report::ExperimentReport;
use std::fs;
use std::path::Path;

/// Exit status of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// All margins pass.
    Pass,
    /// At least one bound was violated.
    BoundViolated,
}

/// Run an experiment from config text and write `report.json` and
/// `table.csv` into `out_dir`.
pub fn run_to_dir(
    kind: ExperimentKind,
    config_text: &str,
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<(ExperimentReport, Outcome), ConfigError> {
    let config = Config::parse(config_text)?;
    let report = if kind == ExperimentKind::Dsmc {
        // the dsmc experiment may dump raw samples next to the report
        let seed = seed_override.unwrap_or(config.u64_or("seed", 0)?);
        if config.has("experiment") && config.str_or("experiment", "") != kind.name() {
            return Err(ConfigError(format!(
                "experiment: config names `{}` but `dsmc` was requested",
                config.str_or("experiment", "")
            )));
        }
        experiments::dsmc_run::run_with_dump(
            &config,
            seed,
            &experiments::config_hash(&config),
            Some(out_dir),
        )?
    } else {
        experiments::run(kind, &config, seed_override)?
    };
    fs::create_dir_all(out_dir)
        .map_err(|e| ConfigError(format!("cannot create {out_dir:?}: {e}")))?;
    fs::write(out_dir.join("report.json"), report.to_json())
        .map_err(|e| ConfigError(format!("cannot write report.json: {e}")))?;
    let mut csv = Vec::new();
    report
        .write_csv(&mut csv)
        .map_err(|e| ConfigError(format!("cannot render table.csv: {e}")))?;
    fs::write(out_dir.join("table.csv"), csv)
        .map_err(|e| ConfigError(format!("cannot write table.csv: {e}")))?;
    let outcome = if report.passed {
        Outcome::Pass
    } else {
        Outcome::BoundViolated
    };
    Ok((report, outcome))
}
