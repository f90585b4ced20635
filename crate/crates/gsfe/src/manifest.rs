//! Run manifests: what was run, on what, and what came out.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| CliError::io(path, e))?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

/// No timestamps, host names or thread counts: equal runs give equal
/// manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(subcommand: &str, seed: Option<u64>, reps: Option<usize>, config: &serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seed,
            reps,
            config_sha256: sha256_hex(config.to_string().as_bytes()),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    /// Records an input by role (e.g. `persons`) and content hash.
    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            name: role.into(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn add_artifact(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.artifacts.push(FileDigest {
            name: name.into(),
            sha256: sha256_file(&dir.join(name))?,
        });
        Ok(())
    }

    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.artifacts.sort_by(|a, b| a.name.cmp(&b.name));
        crate::io::write_json(&dir.join(MANIFEST_FILE), self)
    }
}
