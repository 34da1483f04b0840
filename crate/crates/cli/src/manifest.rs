//! `manifest-v1`: what ran, with which inputs, and the hash of every artifact.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::error::{CliError, Result};
use crate::modelfile::{LoadedModel, ModelFile};

pub const MANIFEST_SCHEMA: &str = "manifest-v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub schema: String,
    /// UUID v5 of the command, seed, model hash and parameters.
    pub campaign_id: Uuid,
    pub command: String,
    pub seed: u64,
    pub model_hash: Option<String>,
    pub model: Option<ModelFile>,
    pub params: serde_json::Value,
    pub code_version: String,
    pub rng: String,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub wall_seconds: Option<f64>,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn campaign_id(
    command: &str,
    seed: u64,
    model_hash: Option<&str>,
    params: &serde_json::Value,
) -> Uuid {
    let key = serde_json::json!({
        "command": command,
        "seed": seed,
        "modelHash": model_hash,
        "params": params,
        "codeVersion": env!("CARGO_PKG_VERSION"),
    });
    Uuid::new_v5(&Uuid::NAMESPACE_OID, key.to_string().as_bytes())
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// An output directory being filled by one command.
#[derive(Debug)]
pub struct Campaign {
    dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Campaign {
    /// Creates the directory and records the seed and parameters before any
    /// work is done.
    pub fn start(
        dir: &Path,
        command: &str,
        seed: u64,
        model: Option<&LoadedModel>,
        params: serde_json::Value,
        threads: usize,
    ) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let model_hash = model.map(|m| m.hash.clone());
        let manifest = RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            campaign_id: campaign_id(command, seed, model_hash.as_deref(), &params),
            command: command.into(),
            seed,
            model_hash,
            model: model.map(|m| m.file.clone()),
            params,
            code_version: env!("CARGO_PKG_VERSION").into(),
            rng: pamsim_core::rng::RNG_DESCRIPTION.into(),
            threads,
            started_at: now(),
            finished_at: None,
            wall_seconds: None,
            outputs: Vec::new(),
        };
        let c = Self {
            dir: dir.to_path_buf(),
            manifest,
            clock: Instant::now(),
        };
        c.write_manifest()?;
        Ok(c)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn campaign_id(&self) -> Uuid {
        self.manifest.campaign_id
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.retain(|o| o.path != name);
        self.manifest.outputs.push(OutputEntry {
            path: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(CliError::run)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn write_manifest(&self) -> Result<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).map_err(CliError::run)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.finished_at = Some(now());
        self.manifest.wall_seconds = Some(self.clock.elapsed().as_secs_f64());
        self.write_manifest()?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(CliError::config(format!(
            "{}: unsupported schema {:?}",
            path.display(),
            m.schema
        )));
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputProblem {
    Missing(String),
    HashMismatch {
        path: String,
        expected: String,
        found: String,
    },
}

/// Checks that every listed output exists with the recorded hash.
pub fn verify_outputs(dir: &Path, manifest: &RunManifest) -> Vec<OutputProblem> {
    let mut problems = Vec::new();
    for o in &manifest.outputs {
        match std::fs::read(dir.join(&o.path)) {
            Err(_) => problems.push(OutputProblem::Missing(o.path.clone())),
            Ok(bytes) => {
                let found = sha256_hex(&bytes);
                if found != o.sha256 {
                    problems.push(OutputProblem::HashMismatch {
                        path: o.path.clone(),
                        expected: o.sha256.clone(),
                        found,
                    });
                }
            }
        }
    }
    problems
}
