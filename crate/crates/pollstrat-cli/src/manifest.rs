//! Run manifests: a deterministic JSON record of what produced an output
//! directory, with content digests of every input.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub fn write<P: AsRef<Path>>(
    dir: &Path,
    command: &str,
    inputs: &[P],
    outputs: &[&str],
    config: serde_json::Value,
) -> Result<()> {
    let mut digests = serde_json::Map::new();
    for input in inputs {
        let path = input.as_ref();
        let bytes =
            fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        digests.insert(
            path.display().to_string(),
            serde_json::Value::String(hex::encode(Sha256::digest(&bytes))),
        );
    }
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": digests,
        "config": config,
        "outputs": outputs,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
}
