//! Output directory with per-file digests and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

pub struct OutDir {
    dir: PathBuf,
    prefix: String,
    outputs: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: String::new(),
            outputs: BTreeMap::new(),
        })
    }

    /// Prepended to every later output name; may contain `/`.
    pub fn set_prefix(&mut self, prefix: &str) {
        self.prefix = prefix.to_string();
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let name = format!("{}{name}", self.prefix);
        let path = self.dir.join(&name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(name, sha256_hex(bytes));
        Ok(())
    }

    /// Collects whatever `f` writes and stores it under `name`.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.write_bytes(name, &buf)
    }

    /// Writes `manifest.json`; it lists every other output with its digest.
    pub fn finish(
        mut self,
        subcommand: &str,
        config: &BTreeMap<String, String>,
        inputs: &BTreeMap<String, InputDigest>,
    ) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'a str,
            version: &'a str,
            subcommand: &'a str,
            config: &'a BTreeMap<String, String>,
            inputs: &'a BTreeMap<String, InputDigest>,
            outputs: &'a BTreeMap<String, String>,
        }
        let outputs = std::mem::take(&mut self.outputs);
        self.write_json(
            "manifest.json",
            &Manifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                subcommand,
                config,
                inputs,
                outputs: &outputs,
            },
        )
    }
}

/// CSV writer over a byte buffer.
pub fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}

/// Formats an optional float; absent values become empty fields.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
