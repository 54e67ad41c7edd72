// SPDX-License-Identifier: MIT OR Apache-2.0

//! Input parsing, output writing and exit-code classification.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use mqseg::MqsError;

/// An error with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    /// Bad arguments or unreadable input.
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    pub fn internal(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }
}

impl From<MqsError> for CliError {
    fn from(e: MqsError) -> Self {
        // Everything the engine rejects traces back to arguments, input data
        // or the threshold table file.
        Self::usage(e)
    }
}

impl From<mqseg_simlab::SimError> for CliError {
    fn from(e: mqseg_simlab::SimError) -> Self {
        match e {
            mqseg_simlab::SimError::Csv { .. } => Self::internal(e),
            _ => Self::usage(e),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn parse_value(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

/// Reads one column of numbers. The first row may be a header; a header with
/// a `value` column selects that column, otherwise the first column is used.
pub fn read_column(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(CliError::usage)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut column = 0;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record
            .with_context(|| format!("{}: malformed CSV", path.display()))
            .map_err(CliError::usage)?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = record.get(column).unwrap_or("");
        match parse_value(field) {
            Some(v) => out.push(v),
            None if line == 0 => {
                column = record.iter().position(|h| h.eq_ignore_ascii_case("value")).unwrap_or(0);
            }
            None => {
                return Err(CliError::usage(anyhow!(
                    "{}, line {}: `{field}` is not a number",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(anyhow!("{} holds no observations", path.display())));
    }
    Ok(out)
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult {
    match out {
        Some(path) => fs::write(path, bytes)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::usage),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .context("cannot write to stdout")
            .map_err(CliError::internal),
    }
}
