//! File helpers and the run manifest written by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use carid::models::VehicleParams;
use carid::sysid::ParamsDocument;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Loads a parameter document and insists that every group is present.
pub fn read_complete_params(path: &Path) -> Result<(ParamsDocument, VehicleParams)> {
    if !path.is_file() {
        bail!("parameter file {} does not exist", path.display());
    }
    let doc: ParamsDocument = read_json(path)?;
    let params = doc.to_vehicle_params().with_context(|| format!("unusable parameters in {}", path.display()))?;
    Ok((doc, params))
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(Self { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
    }
}

/// Everything needed to reproduce a run: inputs by content hash, the seed,
/// the tool version and the modelling choices in effect. It carries no
/// timestamps so identical runs write identical manifests.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub arguments: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub decisions: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &'static str, arguments: serde_json::Value) -> Self {
        Self {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            arguments,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            decisions: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("run_manifest.json");
        write_file(&path, to_json_pretty(self)?)?;
        Ok(path)
    }
}
