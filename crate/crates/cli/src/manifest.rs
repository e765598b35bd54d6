//! Run manifests written next to every command's primary output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A file touched by a run, fingerprinted with CRC-32.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub crc32: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        let data = fs::read(path).with_context(|| format!("fingerprinting {}", path.display()))?;
        Ok(FileRecord {
            path: path.display().to_string(),
            bytes: data.len() as u64,
            crc32: format!("{:08x}", crc32fast::hash(&data)),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Full argument vector; replaying it reruns the command.
    pub argv: Vec<String>,
    pub config: Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub seed: Option<u64>,
    pub duration_secs: f64,
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl RunManifest {
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = manifest_path(out);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(lexattr::Error::from)?;
        Ok(serde_json::from_str(&text).map_err(lexattr::Error::from)?)
    }
}
