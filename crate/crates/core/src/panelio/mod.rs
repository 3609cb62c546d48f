//! Text formats: panel CSV files, TOML configuration, fit and comparison reports.

mod config;
mod csvpanel;
mod report;

pub use config::{
    format_config, parse_config, read_config, write_config, Config, SimulationSettings,
    CONFIG_SCHEMA,
};
pub use csvpanel::{format_panel, parse_panel, read_panel, write_panel, PANEL_HEADER};
pub use report::{
    format_comparison, format_report, parse_comparison, parse_report, read_report,
    render_report_table, write_report, ComparisonReport, FitReport, Method, ProfileRow,
    ReportDiagnostics, SegmentReport, StdErrorReport, COMPARISON_SCHEMA, REPORT_SCHEMA,
};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
