//! Output paths, provenance headers, and the hash check on inputs.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use pakd_core::experiment::RunConfig;
use pakd_core::io::write_atomic;
use pakd_core::teachersim::{ingest_jsonl, write_jsonl, AnnotatedExample};
use serde_json::{json, Value};

use crate::{config_error, Failure};

pub const LABELED: &str = "labeled";
pub const UNLABELED: &str = "unlabeled";
pub const TEST: &str = "test";
pub const TRAIN: &str = "train";

pub fn pool_path(config: &RunConfig, pool: &str) -> PathBuf {
    Path::new(&config.out).join(format!("{pool}.jsonl"))
}

/// Provenance carried by every file the tool writes.
pub fn header(config: &RunConfig) -> Value {
    json!({
        "config_hash": config.hash(),
        "data_hash": config.data_hash(),
        "config": config,
    })
}

pub fn write_pool(config: &RunConfig, pool: &str, examples: &[AnnotatedExample]) -> Result<PathBuf, Failure> {
    let path = pool_path(config, pool);
    let mut bytes = Vec::new();
    let mut h = header(config);
    h["pool"] = json!(pool);
    write_jsonl(&mut bytes, Some(&h), examples)?;
    write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Reads a pool written by an earlier command and rejects it unless it was
/// produced from the same data settings as `config`.
pub fn read_pool(config: &RunConfig, pool: &str) -> Result<Vec<AnnotatedExample>, Failure> {
    let path = pool_path(config, pool);
    let file = ingest_jsonl(&path).with_context(|| format!("reading {}", path.display()))?;
    let found = file
        .header
        .as_ref()
        .and_then(|h| h.get("data_hash"))
        .and_then(Value::as_str)
        .ok_or_else(|| config_error(anyhow!("{} has no provenance header", path.display())))?;
    check_hash(&path, found, &config.data_hash())?;
    Ok(file.examples)
}

pub fn check_hash(path: &Path, found: &str, expected: &str) -> Result<(), Failure> {
    if found == expected {
        Ok(())
    } else {
        Err(config_error(anyhow!(
            "{} was produced with data hash {found}, but this config gives {expected}",
            path.display()
        )))
    }
}

/// `# key=value` lines naming the config and data an output came from.
pub fn comment_header(config: &RunConfig) -> String {
    format!("# config_hash={}\n# data_hash={}\n", config.hash(), config.data_hash())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}

/// Wraps a result in the provenance header.
pub fn json_document(config: &RunConfig, result: impl serde::Serialize) -> String {
    let mut doc = header(config);
    doc["result"] = serde_json::to_value(result).expect("results serialize");
    let mut text = serde_json::to_string_pretty(&doc).expect("json serializes");
    text.push('\n');
    text
}

pub fn svg_document(config: &RunConfig, svg: &str) -> String {
    format!(
        "<!-- config_hash={} data_hash={} -->\n{svg}",
        config.hash(),
        config.data_hash()
    )
}
