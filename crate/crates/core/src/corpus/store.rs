//! JSON-lines corpus store: `functions.jsonl` plus `manifest.json`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CorpusError, CorpusSnapshot, ExtractionConfig, ExtractionStats, FunctionRecord};

pub const FUNCTIONS_FILE: &str = "functions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

/// Handle to a saved corpus directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStore {
    pub dir: PathBuf,
}

impl CorpusStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CorpusStore { dir: dir.into() }
    }

    pub fn functions_path(&self) -> PathBuf {
        self.dir.join(FUNCTIONS_FILE)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    project_name: String,
    commit_id: String,
    extraction_config: ExtractionConfig,
    stats: ExtractionStats,
    record_count: usize,
    functions_sha256: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CorpusError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = BufWriter::new(fs::File::create(&tmp).map_err(io_err(&tmp))?);
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn save_corpus(snapshot: &CorpusSnapshot, dir: &Path) -> Result<CorpusStore, CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut body = Vec::new();
    for r in &snapshot.records {
        serde_json::to_writer(&mut body, r)
            .map_err(|source| CorpusError::Json { path: dir.join(FUNCTIONS_FILE), source })?;
        body.push(b'\n');
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        project_name: snapshot.project_name.clone(),
        commit_id: snapshot.commit_id.clone(),
        extraction_config: snapshot.extraction_config.clone(),
        stats: snapshot.stats.clone(),
        record_count: snapshot.records.len(),
        functions_sha256: hex::encode(Sha256::digest(&body)),
    };
    write_atomic(&dir.join(FUNCTIONS_FILE), &body)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest)
        .map_err(|source| CorpusError::Json { path: manifest_path.clone(), source })?;
    write_atomic(&manifest_path, &json)?;
    Ok(CorpusStore { dir: dir.to_path_buf() })
}

pub fn load_corpus(store: &CorpusStore) -> Result<CorpusSnapshot, CorpusError> {
    let manifest_path = store.dir.join(MANIFEST_FILE);
    let functions_path = store.dir.join(FUNCTIONS_FILE);
    let raw = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_slice(&raw).map_err(|e| CorpusError::Integrity {
        path: manifest_path.clone(),
        reason: format!("unreadable manifest: {e}"),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(CorpusError::Integrity {
            path: manifest_path,
            reason: format!("unsupported format version {}", manifest.format_version),
        });
    }
    let body = fs::read(&functions_path).map_err(io_err(&functions_path))?;
    let digest = hex::encode(Sha256::digest(&body));
    if digest != manifest.functions_sha256 {
        return Err(CorpusError::Integrity {
            path: functions_path,
            reason: format!("checksum mismatch: manifest {}, file {digest}", manifest.functions_sha256),
        });
    }
    let mut records = Vec::with_capacity(manifest.record_count);
    for (n, line) in body.split(|&b| b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let rec: FunctionRecord = serde_json::from_slice(line).map_err(|e| CorpusError::Integrity {
            path: functions_path.clone(),
            reason: format!("line {}: {e}", n + 1),
        })?;
        records.push(rec);
    }
    if records.len() != manifest.record_count {
        return Err(CorpusError::Integrity {
            path: functions_path,
            reason: format!("expected {} records, found {}", manifest.record_count, records.len()),
        });
    }
    Ok(CorpusSnapshot {
        project_name: manifest.project_name,
        commit_id: manifest.commit_id,
        extraction_config: manifest.extraction_config,
        stats: manifest.stats,
        records,
    })
}
