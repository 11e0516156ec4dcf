use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    seed: u64,
    config_hash: &'a str,
    files: Vec<ManifestEntry>,
}

/// Writes files under one output directory and remembers what it wrote.
pub struct Artifacts {
    root: PathBuf,
    written: Vec<(String, String, usize)>,
}

impl Artifacts {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.written.retain(|(p, _, _)| p != rel);
        self.written.push((rel.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> std::io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes `manifest.json` listing every file written so far, sorted by path.
    pub fn finish(mut self, subcommand: &str, seed: u64, config_hash: &str) -> std::io::Result<()> {
        self.written.sort();
        let manifest = Manifest {
            subcommand,
            seed,
            config_hash,
            files: self
                .written
                .iter()
                .map(|(path, sha256, bytes)| ManifestEntry {
                    path: path.clone(),
                    sha256: sha256.clone(),
                    bytes: *bytes,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(self.root.join("manifest.json"), text)
    }
}
