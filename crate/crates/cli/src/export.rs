//! Bit-exact artifact writers. CSV floats are printed with 17 significant
//! digits so that reading them back reproduces the original doubles, and
//! JSON goes through serde with a stable field order, which makes reruns
//! byte-identical.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

/// Formats a double so the decimal representation round-trips exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, e: std::io::Error) -> String {
    format!("cannot write {}: {e}", path.display())
}

/// Writes a CSV file with a header row, one record per row, LF line
/// endings and a trailing newline.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), String> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes a JSON document with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, document: &T) -> Result<(), String> {
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    serde_json::to_writer_pretty(&mut file, document)
        .map_err(|e| format!("cannot serialize {}: {e}", path.display()))?;
    file.write_all(b"\n").map_err(|e| io_err(path, e))
}
