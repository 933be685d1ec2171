//! Run manifests: enough to repeat a run and check that it reproduced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub library_version: String,
    pub subcommand: String,
    /// "ok" or the error kind.
    pub status: String,
    pub config_sha256: String,
    /// Full configuration text, so a run can be repeated from the manifest alone.
    pub config: String,
    pub data: Option<PathBuf>,
    pub data_sha256: Option<String>,
    pub seed: u64,
    pub grid_alpha: Option<usize>,
    pub grid_z: Option<usize>,
    pub route: Option<String>,
    pub force: bool,
    pub diagnose_only: bool,
    pub threads: Option<usize>,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::config(format!("manifest: {e}")))?;
        fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}
