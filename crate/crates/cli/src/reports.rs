//! Report plumbing shared by the subcommands: provenance headers,
//! atomic text output, and the CSV flattening behind `report render`.
//!
//! Every JSON report starts with the same provenance fields — tool name,
//! version, worker-thread cap, and a SHA-256 digest per input file — so
//! any result can be traced back to the exact artifacts that produced
//! it. Serialization uses struct field order and sorted JSON maps only,
//! which keeps byte-identical reruns byte-identical.

use serde::Serialize;
use std::path::Path;

use tcx_core::{io, Result};

/// Tool name embedded in every report.
pub const TOOL: &str = "tcx";
/// Tool version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One input file with its content digest.
#[derive(Debug, Serialize)]
pub struct Input {
    pub role: &'static str,
    pub path: String,
    pub sha256: String,
}

/// Digest an input file for the report header.
pub fn input(role: &'static str, path: &Path) -> Result<Input> {
    Ok(Input {
        role,
        path: path.display().to_string(),
        sha256: io::sha256_hex(path)?,
    })
}

/// Serialize a report as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| tcx_core::Error::Json {
        path: "<report>".into(),
        source: e,
    })?;
    s.push('\n');
    Ok(s)
}

/// Write text atomically: a sibling temporary file renamed over the
/// target, so readers never observe a half-written report.
pub fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let io_err = |e: std::io::Error| tcx_core::Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = dir
        .unwrap_or_else(|| Path::new("."))
        .join(format!(".tcx-tmp-{}", std::process::id()));
    std::fs::write(&tmp, text).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Print a report to standard output and, when requested, write the
/// same bytes to a file.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = to_json(value)?;
    print!("{text}");
    if let Some(path) = out {
        write_text_atomic(path, &text)?;
    }
    Ok(())
}

/// Flatten a JSON report into `key,value` CSV rows, one per numeric
/// leaf, with dotted object paths and bracketed array indices. Object
/// keys are emitted in sorted order, so rendering is deterministic
/// regardless of how the report was produced.
pub fn render_csv(value: &serde_json::Value) -> String {
    let mut rows = vec!["key,value".to_string()];
    walk(value, String::new(), &mut rows);
    rows.push(String::new());
    rows.join("\n")
}

fn walk(value: &serde_json::Value, path: String, rows: &mut Vec<String>) {
    use serde_json::Value;
    match value {
        Value::Number(n) => rows.push(format!("{path},{n}")),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                walk(item, format!("{path}[{i}]"), rows);
            }
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for k in keys {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                walk(&map[k], sub, rows);
            }
        }
        // Strings, booleans, and nulls are provenance, not plot data.
        _ => {}
    }
}
