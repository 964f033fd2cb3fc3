//! Provenance stamps and file writing shared by the subcommands.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const TOOL: &str = "cryodbr";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool, version, command and the fully resolved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &'static str, config: Value) -> Self {
        Provenance {
            tool: TOOL,
            version: VERSION,
            command,
            config,
        }
    }

    /// `#` comment lines to put on top of a CSV file.
    pub fn csv_header(&self) -> String {
        format!(
            "# {} {} {}\n# config {}\n",
            self.tool,
            self.version,
            self.command,
            serde_json::to_string(&self.config).expect("config serializes")
        )
    }

    /// Report object with the provenance fields first.
    pub fn wrap<T: Serialize>(&self, schema_body: &T) -> Value {
        let mut out = json!({
            "schema": cryodbr::io::SCHEMA_VERSION,
            "tool": self.tool,
            "version": self.version,
            "command": self.command,
            "config": self.config,
        });
        let body = serde_json::to_value(schema_body).expect("report serializes");
        if let (Value::Object(out), Value::Object(body)) = (&mut out, body) {
            out.extend(body);
        }
        out
    }
}

/// File name only, so that reports do not depend on where inputs live.
pub fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
        }
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Parses `a,b,c` into numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("`{s}` is not a number"))
        })
        .collect()
}

/// Writes a report to stdout; a closed pipe is not an error.
pub fn print_json(value: &Value) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
