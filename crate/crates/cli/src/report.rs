use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Reproducibility header carried by every report.
#[derive(Serialize)]
pub struct Header<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: C,
}

#[derive(Serialize)]
struct JsonReport<'a, C: Serialize, R: Serialize> {
    #[serde(flatten)]
    header: &'a Header<C>,
    results: &'a R,
    wall_clock_s: f64,
}

pub fn header<C: Serialize>(command: &'static str, seed: u64, config: C) -> Header<C> {
    Header {
        tool: "chifield",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config,
    }
}

/// Renders `header` plus either `rows` as CSV or `results` as JSON. The
/// wall-clock time sits alone on the last header line (CSV) or last field
/// (JSON).
pub fn render<C, R, Row>(
    format: Format,
    header: &Header<C>,
    started: Instant,
    results: &R,
    rows: &[Row],
) -> Result<String, CliError>
where
    C: Serialize,
    R: Serialize,
    Row: Serialize,
{
    let wall_clock_s = started.elapsed().as_secs_f64();
    match format {
        Format::Json => {
            let report = JsonReport {
                header,
                results,
                wall_clock_s,
            };
            let mut text = serde_json::to_string_pretty(&report).map_err(chifield::Error::from)?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut text = format!(
                "# {} {} {}\n# seed: {}\n# config: {}\n# wall_clock_s: {:.3}\n",
                header.tool,
                header.version,
                header.command,
                header.seed,
                serde_json::to_string(&header.config).map_err(chifield::Error::from)?,
                wall_clock_s,
            );
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(chifield::Error::from)?;
            }
            let body = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
            text.push_str(&String::from_utf8_lossy(&body));
            Ok(text)
        }
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
