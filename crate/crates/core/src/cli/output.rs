//! Provenance and atomic file output.
//!
//! JSON outputs carry a top-level `provenance` object next to their payload.
//! Line-oriented outputs (JSON-lines, CSV, id lists) get a sidecar
//! `<file>.provenance.json` so the main file stays consumable as-is.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    /// sha256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &'static str, config: impl Serialize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(
            path.display().to_string(),
            hex::encode(Sha256::digest(bytes)),
        );
    }
}

/// Reads a whole input file and records its digest.
pub fn read_input(path: &Path, prov: &mut Provenance) -> Result<Vec<u8>, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    prov.input(path, &bytes);
    Ok(bytes)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Serializes `payload` (a JSON object) with a `provenance` field added.
pub fn json_with_provenance(
    prov: &Provenance,
    payload: impl Serialize,
) -> Result<Vec<u8>, CliError> {
    let mut map =
        match serde_json::to_value(payload).map_err(|e| CliError::Computation(e.to_string()))? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("payload".into(), other);
                m
            }
        };
    map.insert(
        "provenance".into(),
        serde_json::to_value(prov).map_err(|e| CliError::Computation(e.to_string()))?,
    );
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(map))
        .map_err(|e| CliError::Computation(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json(path: &Path, prov: &Provenance, payload: impl Serialize) -> Result<(), CliError> {
    write_atomic(path, &json_with_provenance(prov, payload)?)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    path.with_file_name(name)
}

/// Writes a line-oriented file plus its provenance sidecar.
pub fn write_lines(path: &Path, prov: &Provenance, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes)?;
    write_atomic(
        &sidecar_path(path),
        &json_with_provenance(prov, Map::new())?,
    )
}
