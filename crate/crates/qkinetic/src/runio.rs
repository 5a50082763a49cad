//! Run artifacts: diagnostics CSV, run manifest, verification reports, and
//! raw field snapshots with JSON sidecars.

use crate::diagnostics::DiagnosticsRecord;
use crate::field::DistributionField;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// FNV-1a 64-bit content hash, hex-encoded.
pub fn fnv64_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Provenance record for one run: every emitted file is listed.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8], seed: u64) -> Self {
        RunManifest {
            config_hash: fnv64_hex(config_bytes),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs
            .push(path.file_name().unwrap_or_default().to_string_lossy().into_owned());
    }

    pub fn finish_and_write(mut self, out_dir: &Path) -> std::io::Result<PathBuf> {
        self.finished_unix_ms = now_ms();
        let path = out_dir.join("manifest.json");
        self.outputs.push("manifest.json".into());
        let mut f = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, &self)?;
        f.write_all(b"\n")?;
        Ok(path)
    }
}

fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Write diagnostics records as CSV with the canonical column order.
pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", DiagnosticsRecord::CSV_HEADER)?;
    for r in records {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Raw little-endian f64 snapshot plus a JSON sidecar describing the grid.
pub fn write_snapshot(
    out_dir: &Path,
    index: usize,
    time: f64,
    field: &DistributionField,
    v_max: f64,
    n_per_axis: usize,
    length: f64,
) -> std::io::Result<(PathBuf, PathBuf)> {
    let bin = out_dir.join(format!("snapshot_{index:04}.bin"));
    let mut f = std::fs::File::create(&bin)?;
    let mut buf = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf)?;
    let sidecar = out_dir.join(format!("snapshot_{index:04}.json"));
    let header = serde_json::json!({
        "time": time,
        "layout": "row-major [n_x, n_v], little-endian f64",
        "n_x": field.n_x,
        "n_v": field.n_v,
        "n_per_axis": n_per_axis,
        "v_max": v_max,
        "length": length,
        "delta": field.params.delta,
        "rho": field.params.rho,
    });
    let mut g = std::fs::File::create(&sidecar)?;
    serde_json::to_writer_pretty(&mut g, &header)?;
    g.write_all(b"\n")?;
    Ok((bin, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv64_hex(b""), "cbf29ce484222325");
        assert_eq!(fnv64_hex(b"a"), "af63dc4c8601ec8c");
        assert_ne!(fnv64_hex(b"ab"), fnv64_hex(b"ba"));
    }
}
