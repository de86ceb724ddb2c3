//! Scenario-set CSV files: header `p,v1,...,vT`, one scenario per row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;

pub fn load_csv(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_csv(&text, path)
}

/// Parses CSV text; `origin` only labels error messages.
pub fn parse_csv(text: &str, origin: &Path) -> Result<ScenarioSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header_err = |message: String| Error::HeaderMismatch {
        path: origin.to_path_buf(),
        message,
    };
    let headers = reader.headers().map_err(|e| header_err(e.to_string()))?.clone();
    if headers.get(0) != Some("p") {
        return Err(header_err(format!(
            "first column must be `p`, found {:?}",
            headers.get(0).unwrap_or("")
        )));
    }
    for (i, name) in headers.iter().enumerate().skip(1) {
        if name != format!("v{i}") {
            return Err(header_err(format!("column {} must be `v{i}`, found {name:?}", i + 1)));
        }
    }
    let horizon = headers.len() - 1;
    if horizon == 0 {
        return Err(header_err("no value columns".into()));
    }

    let mut values = Vec::new();
    let mut probs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                message,
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line,
                message: format!("field {} is not a number: {field:?}", i + 1),
            })?;
            if i == 0 {
                probs.push(v);
            } else {
                values.push(v);
            }
        }
    }
    ScenarioSet::from_flat(values, probs, horizon)
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn to_csv_string(set: &ScenarioSet) -> String {
    let mut out = String::from("p");
    for t in 1..=set.horizon() {
        let _ = write!(out, ",v{t}");
    }
    out.push('\n');
    for (s, scenario) in set.scenarios().enumerate() {
        let _ = write!(out, "{:?}", set.prob(s));
        for v in scenario {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(set: &ScenarioSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_csv_string(set))?;
    Ok(())
}
