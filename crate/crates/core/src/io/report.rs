use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::audit::AuditTrace;
use crate::bounds::BoundReport;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::simulate::{plot_table, RegimeGrid, SimulationResult};

use super::SummaryStats;

/// Anything [`emit_report`] can write. Reports with a flat plot table get it
/// written next to the JSON.
pub trait Report: Serialize {
    fn plot_table(&self) -> Option<String> {
        None
    }
}

impl<T: Scalar + Serialize> Report for AuditTrace<T> {}
impl Report for BoundReport {}
impl Report for Vec<BoundReport> {}
impl Report for SummaryStats {}
impl Report for RegimeGrid {}

impl Report for SimulationResult {
    fn plot_table(&self) -> Option<String> {
        Some(plot_table(self))
    }
}

/// Pretty JSON with struct fields in declaration order and map keys sorted.
/// Floats use the shortest text that parses back to the same bits.
pub fn to_json<R: Serialize + ?Sized>(report: &R) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Writes `report` to `path` as JSON, and its plot table (if any) to the same
/// path with extension `csv`.
pub fn emit_report<R: Report + ?Sized>(report: &R, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, to_json(report)?)?;
    if let Some(table) = report.plot_table() {
        fs::write(path.with_extension("csv"), table)?;
    }
    Ok(())
}
