//! Content-addressed stage provenance.
//!
//! Every stage writes `provenance/<stage>.json` next to its artifacts,
//! recording SHA-256 digests of its external inputs, of the settings it
//! ran with, of each upstream stage's provenance record and of its own
//! outputs. A consumer verifies the whole upstream chain before reading
//! anything and reports the stage that must be re-run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub seed: u64,
    /// Digest of the stage's canonical settings.
    pub settings: String,
    /// External input files, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// Upstream stage name to the digest of its provenance record.
    pub upstream: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) to digest.
    pub outputs: BTreeMap<String, String>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(digest_bytes(&bytes))
}

/// Digest of a settings value, taken over its canonical JSON form.
pub fn digest_settings<T: Serialize>(settings: &T) -> String {
    let json = serde_json::to_vec(settings).expect("settings serialize");
    digest_bytes(&json)
}

pub fn record_path(out: &Path, stage: &str) -> PathBuf {
    out.join("provenance").join(format!("{stage}.json"))
}

pub fn read_record(out: &Path, stage: &str) -> Result<Option<Provenance>> {
    let path = record_path(out, stage);
    if !path.is_file() {
        return Ok(None);
    }
    formats::read_json(&path).map(Some)
}

/// What a stage expects its record to say right now: used both to write
/// a fresh record and to detect staleness of an old one.
#[derive(Debug, Clone)]
pub struct Expectation {
    pub stage: String,
    pub settings: String,
    pub inputs: BTreeMap<String, PathBuf>,
    pub upstream: Vec<String>,
}

impl Expectation {
    pub fn new(stage: &str, settings: String) -> Self {
        Self {
            stage: stage.into(),
            settings,
            inputs: BTreeMap::new(),
            upstream: Vec::new(),
        }
    }

    pub fn input(mut self, role: impl Into<String>, path: &Path) -> Self {
        self.inputs.insert(role.into(), path.to_path_buf());
        self
    }

    pub fn upstream(mut self, stage: &str) -> Self {
        self.upstream.push(stage.into());
        self
    }

    /// Writes the record after the stage produced `outputs`.
    pub fn commit(&self, out: &Path, seed: u64, outputs: &[&str]) -> Result<Provenance> {
        let mut rec = Provenance {
            stage: self.stage.clone(),
            seed,
            settings: self.settings.clone(),
            ..Default::default()
        };
        for (role, p) in &self.inputs {
            rec.inputs.insert(role.clone(), digest_file(p)?);
        }
        for up in &self.upstream {
            rec.upstream.insert(up.clone(), digest_file(&record_path(out, up))?);
        }
        for name in outputs {
            rec.outputs.insert((*name).into(), digest_file(&out.join(name))?);
        }
        formats::write_json(&record_path(out, &self.stage), &rec)?;
        Ok(rec)
    }
}

fn stale(stage: &str, message: String) -> Error {
    Error::Stale {
        stage: stage.into(),
        message,
    }
}

/// Verifies one stage's record against the current files and settings.
/// `expect` rebuilds a stage's expectation from the current
/// configuration; upstream stages are checked recursively.
pub fn verify<F>(out: &Path, stage: &str, expect: &F) -> Result<Provenance>
where
    F: Fn(&str) -> Result<Expectation>,
{
    let rec = read_record(out, stage)?.ok_or_else(|| stale(stage, format!("`{stage}` has not been run")))?;
    for (name, digest) in &rec.outputs {
        let path = out.join(name);
        if !path.is_file() {
            return Err(stale(stage, format!("artifact {name} is missing")));
        }
        if &digest_file(&path)? != digest {
            return Err(stale(stage, format!("artifact {name} changed after `{stage}` wrote it")));
        }
    }
    let now = expect(stage)?;
    if now.settings != rec.settings {
        return Err(stale(stage, format!("settings of `{stage}` changed since it ran")));
    }
    if now.inputs.len() != rec.inputs.len() || now.inputs.keys().ne(rec.inputs.keys()) {
        return Err(stale(stage, format!("the inputs of `{stage}` changed since it ran")));
    }
    for (role, p) in &now.inputs {
        if !p.is_file() {
            return Err(Error::validation(format!("input {role} not found: {}", p.display())));
        }
        if digest_file(p)? != rec.inputs[role] {
            return Err(stale(stage, format!("input {role} ({}) changed since `{stage}` ran", p.display())));
        }
    }
    for up in &now.upstream {
        let recorded = rec
            .upstream
            .get(up)
            .ok_or_else(|| stale(stage, format!("`{stage}` ran without `{up}`")))?;
        verify(out, up, expect)?;
        if &digest_file(&record_path(out, up))? != recorded {
            return Err(stale(stage, format!("`{up}` was re-run after `{stage}`")));
        }
    }
    Ok(rec)
}
