//! JSON persistence of selection reports.

use std::path::Path;

use crate::error::{Result, SrcekError};
use crate::selection::SelectionReport;

pub fn report_to_string(report: &SelectionReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| SrcekError::Format {
        path: "<report>".into(),
        message: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

pub fn write_report(report: &SelectionReport, path: &Path) -> Result<()> {
    let s = report_to_string(report)?;
    std::fs::write(path, s).map_err(|e| SrcekError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<SelectionReport> {
    let text = std::fs::read_to_string(path).map_err(|e| SrcekError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SrcekError::Parse {
        path: path.display().to_string(),
        row: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
