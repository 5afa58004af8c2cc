use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One named numerical check.
///
/// Residual checks pass when `|value| <= tol`. Lower-bound checks pass when
/// `value >= tol` and carry the bound in `tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn residual(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Check { name: name.into(), value, tol, pass: value.abs() <= tol }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, tol: bound, pass: value >= bound }
    }

    /// A check that could not be evaluated; it fails with a NaN value.
    pub fn errored(name: impl Into<String>) -> Self {
        Check { name: name.into(), value: f64::NAN, tol: 0.0, pass: false }
    }
}

/// Outcome of a scenario or verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub wall_ms: u64,
    pub version: String,
    /// Resolved parameters, so that defaults are visible in the output.
    pub params: BTreeMap<String, String>,
    /// Solver outcomes that are reported but not checked.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, String>,
}

impl RunReport {
    pub fn new(scenario: &str, params: BTreeMap<String, String>) -> Self {
        RunReport {
            scenario: scenario.to_string(),
            checks: Vec::new(),
            wall_ms: 0,
            version: adaptconv::VERSION.to_string(),
            params,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.diagnostics.insert(key.into(), value.to_string());
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
    }
}
