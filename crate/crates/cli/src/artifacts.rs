//! Artifact files, their `.meta.json` sidecars and fingerprint checks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of a file's contents, with a message naming the file on failure.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Chains a stage name, the upstream fingerprint and the stage's own inputs.
pub fn fingerprint(stage: &str, upstream: Option<&str>, inputs: &serde_json::Value) -> String {
    let material = serde_json::json!({
        "stage": stage,
        "upstream": upstream,
        "inputs": inputs,
    });
    sha256_hex(material.to_string().as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub stage: String,
    pub fingerprint: String,
    pub upstream: Option<String>,
    pub inputs: serde_json::Value,
    /// Stage-specific facts about the artifact, such as the EM trace.
    #[serde(default)]
    pub summary: serde_json::Value,
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))?;
    let file_name = path.file_name().context("artifact path has no file name")?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    {
        let mut file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(contents)
            .with_context(|| format!("writing {}", tmp.display()))?;
        file.sync_all().ok();
    }
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))
}

/// Writes an artifact and then its sidecar.
pub fn write_artifact(path: &Path, contents: &[u8], meta: &Meta) -> Result<()> {
    write_atomic(path, contents)?;
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    write_atomic(&meta_path(path), format!("{json}\n").as_bytes())
}

pub fn read_meta(artifact: &Path) -> Result<Meta> {
    let path = meta_path(artifact);
    let text = fs::read_to_string(&path).with_context(|| format!("reading sidecar {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing sidecar {}", path.display()))
}

/// Loads an upstream artifact after checking that it exists and that its
/// sidecar records `expected`. A mismatch is an error unless `force`.
pub fn load_checked(path: &Path, producer: &str, expected: &str, force: bool) -> Result<(String, Meta)> {
    if !path.exists() {
        bail!(
            "missing artifact {}; run `rulecircuit {producer}` with the same configuration first",
            path.display()
        );
    }
    let meta = read_meta(path)?;
    if meta.fingerprint != expected {
        if force {
            log::warn!(
                "{} was produced under a different configuration ({}); continuing because of --force",
                path.display(),
                short(&meta.fingerprint)
            );
        } else {
            bail!(
                "{} was produced under a different configuration (fingerprint {}, expected {}); \
                 rerun `rulecircuit {producer}` or pass --force",
                path.display(),
                short(&meta.fingerprint),
                short(expected)
            );
        }
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((text, meta))
}

fn short(fp: &str) -> &str {
    &fp[..fp.len().min(12)]
}
