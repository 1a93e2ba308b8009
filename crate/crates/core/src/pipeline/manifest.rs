use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every stage's outputs. Holds no timestamps so reruns
/// with identical inputs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    /// Digest of the configuration this stage depends on.
    pub config_hash: String,
    /// Digest chaining the config hash, input digests and upstream key.
    pub stage_key: String,
    pub upstream: Option<String>,
    pub parameters: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of a value's JSON form. Struct fields serialize in declaration
/// order and maps are ordered, so this is stable.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

pub fn stage_key(
    stage: &str,
    config_hash: &str,
    upstream: Option<&str>,
    inputs: &BTreeMap<String, String>,
) -> String {
    let mut h = Sha256::new();
    for part in [stage, env!("CARGO_PKG_VERSION"), config_hash, upstream.unwrap_or("-")] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    for (name, digest) in inputs {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update(digest.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Errors if any recorded output no longer matches its digest.
    pub fn verify_outputs(&self, dir: &Path) -> Result<()> {
        for (name, digest) in &self.outputs {
            let path = dir.join(name);
            let actual = file_digest(&path).map_err(|_| Error::MissingArtifact {
                stage: self.stage.clone(),
                detail: format!("{} is missing; rerun `{}`", path.display(), self.stage),
            })?;
            if &actual != digest {
                return Err(Error::StaleArtifact {
                    stage: self.stage.clone(),
                    detail: format!("{} changed since it was written; rerun `{}`", path.display(), self.stage),
                });
            }
        }
        Ok(())
    }
}
