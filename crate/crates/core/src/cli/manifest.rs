use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reproducibility record written next to a command's primary output as
/// `<output>.run.json`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub flags: Vec<String>,
    /// sha256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every primary output, keyed by path.
    pub outputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub wall_clock_sec: f64,
    #[serde(skip)]
    primary: Option<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn run_manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".run.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Record an output; the first one recorded decides where the manifest goes.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        self.primary.get_or_insert_with(|| path.to_path_buf());
        Ok(())
    }

    pub fn write(mut self) -> Result<()> {
        let Some(primary) = self.primary.clone() else {
            return Ok(());
        };
        self.tool = env!("CARGO_PKG_NAME").to_string();
        self.version = env!("CARGO_PKG_VERSION").to_string();
        let path = run_manifest_path(&primary);
        let text = serde_json::to_string_pretty(&self).expect("manifest serialization cannot fail");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}
