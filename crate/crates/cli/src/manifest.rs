//! Run manifests: every command that writes outputs drops a JSON manifest
//! next to them recording the resolved configuration, input digests and
//! output digests. No timestamps, so identical runs write identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, Value>,
    /// input path -> sha256 of its bytes
    pub inputs: BTreeMap<String, String>,
    /// output path -> sha256 of its bytes, digested after writing
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "domwatch",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.config.insert(
            key.to_string(),
            serde_json::to_value(value).expect("config values serialize"),
        );
    }

    pub fn add_input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> anyhow::Result<()> {
        self.outputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Write the manifest itself; call last, after all outputs exist.
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let file = File::create(path)
            .with_context(|| format!("cannot create manifest {}", path.display()))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let mut file =
        File::open(path).with_context(|| format!("cannot digest {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
