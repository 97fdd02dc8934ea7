//! Run records: a JSON file next to every output naming the inputs, options,
//! seed and versions that produced it, with SHA-256 content hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use robustkit::fsutil::{path_to_slash, relative_path, write_atomic};

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct Hashed {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub toolkit_version: String,
    pub params_version: String,
    pub seed: Option<u64>,
    pub options: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<Hashed>,
    pub outputs: Vec<Hashed>,
}

fn io_fail(path: &Path, e: std::io::Error) -> Failure {
    Failure::from(robustkit::Error::io(path, e))
}

fn hash_file(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| io_fail(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), Failure> {
    for entry in std::fs::read_dir(dir).map_err(|e| io_fail(dir, e))? {
        let path = entry.map_err(|e| io_fail(dir, e))?.path();
        if path.is_dir() {
            files_under(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// SHA-256 of a file, or for a directory the SHA-256 over sorted
/// `relative/path NUL file-hash LF` lines of every file below it.
pub fn content_hash(path: &Path) -> Result<String, Failure> {
    if !path.is_dir() {
        return hash_file(path);
    }
    let mut files = Vec::new();
    files_under(path, &mut files)?;
    let mut lines: Vec<(String, String)> = files
        .iter()
        .map(|f| Ok((path_to_slash(&relative_path(f, path)), hash_file(f)?)))
        .collect::<Result<_, Failure>>()?;
    lines.sort();
    let mut hasher = Sha256::new();
    for (rel, h) in lines {
        hasher.update(rel.as_bytes());
        hasher.update([0]);
        hasher.update(h.as_bytes());
        hasher.update(b"\n");
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn hashed(path: &Path) -> Result<Hashed, Failure> {
    Ok(Hashed { path: path_to_slash(path), sha256: content_hash(path)? })
}

/// `<output>.run.json`, beside the output file or directory.
pub fn record_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    output.with_file_name(name)
}

impl RunRecord {
    pub fn new(command: &str, params_version: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            toolkit_version: robustkit::VERSION.to_string(),
            params_version: params_version.to_string(),
            seed,
            options: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn option(mut self, key: &str, value: impl Serialize) -> Self {
        self.options.insert(key.to_string(), serde_json::to_value(value).expect("option serializes"));
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self, Failure> {
        self.inputs.push(hashed(path)?);
        Ok(self)
    }

    /// Hashes `outputs` and writes the record next to the first of them.
    pub fn write(mut self, outputs: &[&Path]) -> Result<(), Failure> {
        for out in outputs {
            self.outputs.push(hashed(out)?);
        }
        let mut text = serde_json::to_string_pretty(&self).expect("run record serializes");
        text.push('\n');
        let target = record_path(outputs[0]);
        write_atomic(&target, text.as_bytes()).map_err(Failure::from)
    }
}
