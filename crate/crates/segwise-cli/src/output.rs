//! Result emission: schema-stable JSON or CSV, written atomically.

use crate::args::OutputFormat;
use crate::{CliError, CliResult};
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;

/// Standard envelope: `{meta: {version, seed, params}, result: {...}}`.
pub fn envelope(seed: Option<u64>, params: Value, result: Value) -> Value {
    json!({
        "meta": {
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "params": params,
        },
        "result": result,
    })
}

/// Writes to the path via a temporary file and rename, or to stdout.
pub fn write_output(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())
                .and_then(|_| if content.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
                .map_err(|e| CliError::Data(format!("cannot write to stdout: {e}")))
        }
        Some(path) => {
            let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
            let tmp = match dir {
                Some(d) => d.join(format!(
                    ".{}.tmp-{}",
                    path.file_name().and_then(|f| f.to_str()).unwrap_or("segwise-out"),
                    std::process::id()
                )),
                None => Path::new(&format!(
                    ".{}.tmp-{}",
                    path.display(),
                    std::process::id()
                ))
                .to_path_buf(),
            };
            let mut content = content.to_string();
            if !content.ends_with('\n') {
                content.push('\n');
            }
            std::fs::write(&tmp, content)
                .and_then(|_| std::fs::rename(&tmp, path))
                .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
        }
    }
}

/// Renders a result table as CSV with a header row.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn render(format: OutputFormat, value: &Value, csv: impl FnOnce() -> String) -> String {
    match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(value).expect("json rendering cannot fail")
        }
        OutputFormat::Csv => csv(),
    }
}
