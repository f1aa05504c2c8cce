//! Line-delimited JSON helpers shared by every on-disk artifact.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::IoError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped into every artifact: tool version, config hash, seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self { tool_version: TOOL_VERSION.to_string(), config_hash: config_hash.into(), seed }
    }
}

/// Hex SHA-256 of a value's canonical JSON serialization.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Serializes records one per line, preceded by a `{"_provenance": …}`
/// header line when `provenance` is given.
pub fn to_jsonl<T: Serialize>(provenance: Option<&Provenance>, records: &[T]) -> String {
    let mut out = String::new();
    if let Some(p) = provenance {
        out.push_str(&serde_json::json!({ "_provenance": p }).to_string());
        out.push('\n');
    }
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    provenance: Option<&Provenance>,
    records: &[T],
) -> Result<(), IoError> {
    write_file(path, to_jsonl(provenance, records).as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::Write { path: dir.to_path_buf(), source })?;
    }
    let mut f = fs::File::create(path).map_err(|source| IoError::Write { path: path.to_path_buf(), source })?;
    f.write_all(bytes).map_err(|source| IoError::Write { path: path.to_path_buf(), source })
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })
}

/// One parsed line: its 1-based number and either the record or a message.
pub type LineResult<T> = (usize, Result<T, String>);

/// Reads every non-empty, non-header line. Malformed lines are returned as
/// per-line errors; an unreadable file is fatal.
pub fn read_jsonl_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<LineResult<T>>, IoError> {
    let f = fs::File::open(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || is_header(trimmed) {
            continue;
        }
        out.push((i + 1, serde_json::from_str(trimmed).map_err(|e| e.to_string())));
    }
    Ok(out)
}

/// Like [`read_jsonl_lines`] but the first malformed line is an error.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    read_jsonl_lines(path)?
        .into_iter()
        .map(|(line, r)| r.map_err(|message| IoError::Parse { path: path.to_path_buf(), line, message }))
        .collect()
}

fn is_header(line: &str) -> bool {
    line.starts_with("{\"_provenance\"")
        && serde_json::from_str::<serde_json::Value>(line)
            .is_ok_and(|v| v.as_object().is_some_and(|o| o.len() == 1))
}

/// Provenance header of a jsonl file, if present.
pub fn read_provenance(path: &Path) -> Result<Option<Provenance>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_path_buf(), source })?;
    let Some(first) = text.lines().next() else { return Ok(None) };
    if !is_header(first) {
        return Ok(None);
    }
    let v: serde_json::Value = serde_json::from_str(first).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: e.to_string(),
    })?;
    Ok(serde_json::from_value(v["_provenance"].clone()).ok())
}
