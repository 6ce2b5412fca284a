//! Batch front end for the qrobust pipeline.
//!
//! Reads an oscillator model file, runs the requested stages
//! (validate, invariant, certify, bound/sweep, oracle) and produces a JSON
//! report, or CSV rows for sweeps. See `docs/report-schema.md`.

pub mod model;
pub mod report;
pub mod run;

pub use model::{ModelFile, ParseError};
pub use report::{bounds_csv, Report};
pub use run::{run, CliError, Command, Failure, Format, RunConfig};

/// Serialized report in the requested format.
pub fn render(report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => bounds_csv(report.bounds.as_deref().unwrap_or_default()).map_err(|e| CliError::Io(e.to_string())),
    }
}
