//! Command-line front end of `adaptconv`: scenario runners, configuration,
//! CSV and JSON output, and the `verify` property suite.

pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod scenarios;
pub mod verify;

use std::time::Instant;

use config::{Scenario, ScenarioSpec};
use error::Result;
use report::RunReport;
use scenarios::Outcome;

/// Runs the scenario of `spec` without writing anything.
pub fn execute(spec: &ScenarioSpec) -> Result<Outcome> {
    let start = Instant::now();
    let mut outcome = match spec.scenario {
        Scenario::Smooth1d => scenarios::smooth1d::run(spec)?,
        Scenario::Banana2d => scenarios::banana2d::run(spec)?,
        Scenario::ThreeGauss => scenarios::threegauss::run(spec)?,
        Scenario::VkdeDemo => scenarios::vkde_demo::run(spec)?,
        Scenario::PhaseSpace => scenarios::phasespace::run(spec)?,
        Scenario::Verify => Outcome { report: verify::run(spec)?, tables: Vec::new() },
    };
    outcome.report.wall_ms = start.elapsed().as_millis() as u64;
    Ok(outcome)
}

/// Runs the scenario and writes its tables and `<scenario>_report.json` into `spec.out_dir`.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunReport> {
    let outcome = execute(spec)?;
    for (name, table) in &outcome.tables {
        table.write(&output::output_path(&spec.out_dir, name)?)?;
    }
    let report_name = format!("{}_report.json", spec.scenario.name().replace('-', "_"));
    outcome.report.write(&output::output_path(&spec.out_dir, &report_name)?)?;
    Ok(outcome.report)
}
