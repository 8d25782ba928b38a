//! Result directory: data files plus a manifest that lists them with checksums.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bjj_core::io::{csv_string, format_f64};

use crate::config::MANIFEST_FORMAT;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    /// How each random stream is derived from the master seed.
    pub streams: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub format: String,
    pub manifest_version: u32,
    pub code_version: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub wall_seconds: f64,
    pub threads: usize,
    pub seed_lineage: SeedLineage,
}

pub fn code_version() -> String {
    format!("bjj {}", env!("CARGO_PKG_VERSION"))
}

/// Writes files under one directory and remembers what it wrote.
pub struct Artifacts {
    root: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_owned(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn put(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, text)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_owned());
        }
        Ok(())
    }

    pub fn csv<R: AsRef<[f64]>>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
        let text = csv_string(header, rows)?;
        self.put(name, &text)
    }

    /// CSV with free-form cells (labels next to numbers).
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> anyhow::Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            anyhow::ensure!(row.len() == header.len(), "row width {} does not match header {}", row.len(), header.len());
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.put(name, &text)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.put(name, &text)
    }

    /// Checksums of everything written so far, in write order.
    pub fn entries(&self) -> anyhow::Result<Vec<FileEntry>> {
        self.files
            .iter()
            .map(|name| {
                let data = fs::read(self.root.join(name))?;
                Ok(FileEntry { path: name.clone(), bytes: data.len() as u64, sha256: hex(&Sha256::digest(&data)) })
            })
            .collect()
    }

    pub fn write_manifest(&self, manifest: &ResultManifest) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST_NAME), text)?;
        Ok(())
    }
}

pub fn new_manifest(config: serde_json::Value, seeds: SeedLineage, threads: usize) -> ResultManifest {
    ResultManifest {
        format: MANIFEST_FORMAT.into(),
        manifest_version: MANIFEST_VERSION,
        code_version: code_version(),
        status: "running".into(),
        error: None,
        config,
        files: Vec::new(),
        wall_seconds: 0.0,
        threads,
        seed_lineage: seeds,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_f64(*x),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(hex(&Sha256::digest(b"abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn text_cells_are_quoted_when_needed() {
        assert_eq!(Cell::Text("a,b".into()).render(), "\"a,b\"");
        assert_eq!(Cell::Text("ok".into()).render(), "ok");
        assert_eq!(Cell::Num(0.5).render(), "5.0000000000000000e-1");
    }

    #[test]
    fn entries_track_rewrites_once() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path()).unwrap();
        a.csv("x.csv", &["a"], [[1.0]]).unwrap();
        a.csv("x.csv", &["a"], [[2.0]]).unwrap();
        a.json("sub/y.json", &[1, 2]).unwrap();
        let e = a.entries().unwrap();
        assert_eq!(e.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(), ["x.csv", "sub/y.json"]);
        assert_eq!(e[0].bytes, fs::read(dir.path().join("x.csv")).unwrap().len() as u64);
    }
}
