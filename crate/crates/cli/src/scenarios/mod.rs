//! Worked examples, each producing a report and CSV tables.

pub mod banana2d;
pub mod phasespace;
pub mod smooth1d;
pub mod threegauss;
pub mod vkde_demo;

use crate::output::Table;
use crate::report::RunReport;

/// A finished scenario before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    /// `(file name, table)` pairs.
    pub tables: Vec<(String, Table)>,
}
