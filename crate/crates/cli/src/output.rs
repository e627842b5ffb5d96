//! Tabular output. CSV files open with a `# config: {...}` line followed by
//! the header row; JSON files are a single object with `config`, `columns`
//! and `rows`. Files are written to a temporary sibling and renamed.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{Format, RunConfig};
use crate::CliError;

pub struct Table<R> {
    pub columns: &'static [&'static str],
    pub rows: Vec<R>,
}

#[derive(Serialize)]
struct JsonDoc<'a, R> {
    config: &'a RunConfig,
    columns: &'a [&'static str],
    rows: &'a [R],
}

pub fn render<R: Serialize>(table: &Table<R>, config: &RunConfig) -> Result<Vec<u8>, CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match config.format {
        Format::Csv => {
            let mut buf = Vec::new();
            let header = serde_json::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(buf, "# config: {header}").map_err(io)?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(buf);
            w.write_record(table.columns).map_err(|e| CliError::Io(e.to_string()))?;
            for row in &table.rows {
                w.serialize(row).map_err(|e| CliError::Io(e.to_string()))?;
            }
            w.into_inner().map_err(|e| CliError::Io(e.to_string()))
        }
        Format::Json => {
            let doc = JsonDoc {
                config,
                columns: table.columns,
                rows: &table.rows,
            };
            let mut buf = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Writes `bytes` to `path` atomically, or to stdout when no path is given.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes).map_err(io)?;
        return out.flush().map_err(io);
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Io(format!("cannot create a file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}
