//! CSV and JSON writers. Every file starts with (CSV: a `# ` line of) the
//! JSON metadata block carrying the resolved configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Resolved;
use crate::error::CliError;

/// Prints a line, ignoring a closed stdout.
pub fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

pub fn metadata(command: &str, resolved: &Resolved, extra: Value) -> Value {
    let mut meta = json!({
        "tool": "optopiston",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": resolved,
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    meta
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    }
    let file = File::create(path).map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

pub fn write_csv<T: Serialize>(path: &Path, meta: &Value, rows: &[T]) -> Result<(), CliError> {
    let mut out = create(path)?;
    writeln!(out, "# {}", serde_json::to_string(meta)?)?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, meta: &Value, data: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer(&mut out, &json!({ "metadata": meta, "data": data }))?;
    out.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}
