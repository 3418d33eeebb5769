//! Artifact files and the manifest that indexes them.
//!
//! Every file goes through one `ArtifactWriter`, which keeps names inside the
//! output directory and records a SHA-256 of the exact bytes written.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{EitError, Result};
use crate::spectral::CMatrix;

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<Column>,
}

/// Shortest round-trip decimal; missing values as `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), fmt_f64)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    fn put(&mut self, name: &str, bytes: &[u8], columns: Vec<Column>) -> Result<()> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(EitError::contract(format!("artifact name `{name}` must be a plain file name")));
        }
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(FileRecord {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
            columns,
        });
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, columns: &[Column], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns.iter().map(|c| c.name))?;
        for row in rows {
            if row.len() != columns.len() {
                return Err(EitError::contract(format!(
                    "{name}: row has {} fields, header has {}",
                    row.len(),
                    columns.len()
                )));
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| EitError::Io(e.into_error()))?;
        self.put(name, &bytes, columns.to_vec())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name, &bytes, Vec::new())
    }

    /// Little-endian `f64` pairs (re, im), row-major, plus a `.json` sidecar with the shape.
    pub fn complex_matrix(&mut self, stem: &str, m: &CMatrix) -> Result<()> {
        let mut bytes = Vec::with_capacity(16 * m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v: Complex64 = m[(i, j)];
                bytes.extend_from_slice(&v.re.to_le_bytes());
                bytes.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        self.put(&format!("{stem}.bin"), &bytes, Vec::new())?;
        let shape = serde_json::json!({
            "rows": m.nrows(),
            "cols": m.ncols(),
            "layout": "row-major, little-endian f64 pairs (re, im)",
        });
        self.json(&format!("{stem}.json"), &shape)
    }

    /// Write `manifest.json` listing every artifact; returns its hash.
    pub fn finish(self, mut manifest: serde_json::Map<String, Value>) -> Result<String> {
        manifest.insert("files".into(), serde_json::to_value(&self.files)?);
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(manifest))?;
        bytes.push(b'\n');
        fs::write(self.dir.join("manifest.json"), &bytes)?;
        Ok(sha256_hex(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_opt(None), "nan");
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1e-300).parse::<f64>().unwrap(), 1e-300);
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn writer_records_hashes_and_rejects_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::create(dir.path()).unwrap();
        w.csv("a.csv", &[col("x", "1"), col("y", "1")], vec![vec!["1".into(), "2".into()]]).unwrap();
        assert!(w.csv("b.csv", &[col("x", "1")], vec![vec!["1".into(), "2".into()]]).is_err());
        assert!(w.json("../escape.json", &1).is_err());
        let m = CMatrix::from_element(2, 3, Complex64::new(1.0, -2.0));
        w.complex_matrix("m", &m).unwrap();
        let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "x,y\n1,2\n");
        assert_eq!(w.files()[0].sha256, sha256_hex(text.as_bytes()));
        let bin = std::fs::read(dir.path().join("m.bin")).unwrap();
        assert_eq!(bin.len(), 6 * 16);
        assert_eq!(f64::from_le_bytes(bin[8..16].try_into().unwrap()), -2.0);
        let hash = w.finish(serde_json::Map::new()).unwrap();
        let manifest = std::fs::read(dir.path().join("manifest.json")).unwrap();
        assert_eq!(hash, sha256_hex(&manifest));
    }
}
