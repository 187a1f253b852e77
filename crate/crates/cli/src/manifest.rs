//! Run manifests: what was run, on which inputs, with which seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use opaque_core::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    /// SHA-256 of every input file, keyed by the flag that named it.
    pub config_digests: BTreeMap<String, String>,
    pub seed: u64,
    pub workers: usize,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str, arguments: Vec<String>, seed: u64, workers: usize) -> Self {
        RunManifest {
            command: command.into(),
            arguments,
            config_digests: BTreeMap::new(),
            seed,
            workers,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, flag: &str, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        self.config_digests.insert(flag.into(), hex(&Sha256::digest(&bytes)));
        String::from_utf8(bytes).map_err(|_| Error::InvalidArgument(format!("{} is not UTF-8", path.display())))
    }

    /// Writes the manifest into each directory, once per directory.
    pub fn write_to(&self, dirs: &[PathBuf]) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        let mut seen: Vec<&PathBuf> = Vec::new();
        for d in dirs {
            if seen.contains(&d) {
                continue;
            }
            seen.push(d);
            std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
            let path = d.join(MANIFEST_NAME);
            std::fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
