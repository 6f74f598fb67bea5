use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Input file name, or artifact path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Run record. Holds no timestamps or absolute paths, so reruns with the same
/// config and inputs produce the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub status: String,
    pub inputs: Vec<FileEntry>,
    pub parameters: serde_json::Value,
    pub artifacts: Vec<FileEntry>,
}

/// Writes artifacts into one directory and records their hashes.
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<FileEntry>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self, String> {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), String> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.written.retain(|f| f.path != name);
        self.written.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), String> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| format!("cannot serialize {name}: {e}"))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` listing every artifact so far, sorted by path.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf, String> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.artifacts = std::mem::take(&mut self.written);
        self.write_json(MANIFEST_NAME, &manifest)?;
        Ok(self.dir.join(MANIFEST_NAME))
    }
}

pub fn input_entry(path: &Path) -> Result<FileEntry, String> {
    let bytes = fs::read(path).map_err(|e| format!("cannot read input {}: {e}", path.display()))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("input")
        .to_string();
    Ok(FileEntry {
        path: name,
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}
