use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{CliError, Result};

/// Run metadata attached to every result.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub parameters: Value,
}

impl Meta {
    pub fn new<P: Serialize>(command: &str, seed: u64, parameters: &P) -> Self {
        Meta {
            tool: "chaincalc",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            parameters: serde_json::to_value(parameters).unwrap_or(Value::Null),
        }
    }
}

/// `{"meta": …}` merged with the fields of `result`; keys are sorted.
pub fn envelope<R: Serialize>(meta: &Meta, result: &R) -> Result<Value> {
    let mut out = match serde_json::to_value(result).map_err(|e| CliError::parse("result", e))? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    out.insert("meta".into(), json!(meta));
    Ok(Value::Object(out))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(format!("{what} {}", path.display()), e))
}

pub fn to_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::parse("output", e))?;
    s.push('\n');
    Ok(s)
}

/// Prints to stdout or writes the file.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// CSV with `#`-prefixed metadata lines ahead of the header.
pub fn csv_text(meta: &Meta, extra: &[(&str, String)], header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut text = String::new();
    let line = serde_json::to_string(meta).map_err(|e| CliError::parse("metadata", e))?;
    text.push_str(&format!("# meta {line}\n"));
    for (k, v) in extra {
        text.push_str(&format!("# {k} {v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::parse("csv", e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::parse("csv", e))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::parse("csv", e))?;
    text.push_str(&String::from_utf8_lossy(&bytes));
    Ok(text)
}

/// Shortest round-trip formatting.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
