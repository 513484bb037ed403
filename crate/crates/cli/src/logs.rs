//! Tagged log collections on disk.
//!
//! A directory either holds a `manifest.json` listing each CSV with its
//! experiment type, or one sub-directory per experiment (`coast/`, `step/`,
//! `steer/`, `sine/`, `mocap/`) containing CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use carid::sim::Scenario;
use carid::sysid::{load_log, Experiment, TaggedLog};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEntry {
    /// Path relative to the manifest's directory.
    pub file: String,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub logs: Vec<LogEntry>,
}

/// Log files in `dir` with their experiment tags, in a stable order.
pub fn discover(dir: &Path) -> Result<Vec<(PathBuf, Experiment)>> {
    if !dir.is_dir() {
        bail!("log directory {} does not exist", dir.display());
    }
    let manifest = dir.join(MANIFEST_FILE);
    let found = if manifest.is_file() {
        let m: LogManifest = crate::io::read_json(&manifest)?;
        m.logs.into_iter().map(|e| (dir.join(e.file), e.experiment)).collect()
    } else {
        let mut found = Vec::new();
        for experiment in Experiment::ALL {
            let sub = dir.join(experiment.as_str());
            if !sub.is_dir() {
                continue;
            }
            let mut files: Vec<PathBuf> = fs::read_dir(&sub)
                .with_context(|| format!("cannot list {}", sub.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            files.sort();
            found.extend(files.into_iter().map(|f| (f, experiment)));
        }
        found
    };
    if found.is_empty() {
        bail!(
            "no logs found in {}: expected {MANIFEST_FILE} or coast/, step/, steer/, sine/, mocap/ sub-directories with CSV files",
            dir.display()
        );
    }
    Ok(found)
}

pub fn load_all(files: &[(PathBuf, Experiment)]) -> Result<Vec<TaggedLog>> {
    files
        .iter()
        .map(|(path, experiment)| {
            let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let log = load_log(file).with_context(|| format!("in {}", path.display()))?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(TaggedLog { name, experiment: *experiment, log })
        })
        .collect()
}
