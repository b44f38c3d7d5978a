//! Function corpus: extraction of definitions from a C/C++ tree, token
//! filtering, and the on-disk store.

pub mod extract;
pub mod lexer;
mod store;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

pub use lexer::count_tokens;
pub use store::{load_corpus, save_corpus, CorpusStore};

const SOURCE_EXTENSIONS: &[&str] = &["c", "h", "cc", "cpp", "cxx", "hpp", "hh", "hxx", "inc"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("project root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("invalid token bounds {min}..={max}")]
    InvalidBounds { min: usize, max: usize },
    #[error("invalid exclusion glob `{glob}`: {source}")]
    BadGlob {
        glob: String,
        #[source]
        source: globset::Error,
    },
    #[error("no function definitions found under {0}; is this the project root?")]
    NoFunctions(PathBuf),
    #[error("store integrity error in {path}: {reason}")]
    Integrity { path: PathBuf, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed store entry in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// One extracted function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub id: String,
    /// Path relative to the project root, `/`-separated.
    pub file_path: String,
    pub start_line: u32,
    pub end_line: u32,
    /// Byte offsets into the file, end exclusive.
    pub byte_span: (usize, usize),
    pub name: String,
    pub source_text: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Globs over root-relative paths; matching files are not scanned.
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig { min_tokens: 10, max_tokens: 256, exclude: Vec::new() }
    }
}

/// How many definitions were seen and why some were dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub files_scanned: usize,
    pub files_unreadable: usize,
    pub functions_found: usize,
    pub below_min: usize,
    pub above_max: usize,
    pub non_utf8: usize,
}

impl ExtractionStats {
    /// Fraction of found functions removed by the token bounds.
    pub fn filtered_fraction(&self) -> f64 {
        if self.functions_found == 0 {
            return 0.0;
        }
        (self.below_min + self.above_max) as f64 / self.functions_found as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSnapshot {
    pub project_name: String,
    pub commit_id: String,
    pub extraction_config: ExtractionConfig,
    #[serde(default)]
    pub stats: ExtractionStats,
    pub records: Vec<FunctionRecord>,
}

impl CorpusSnapshot {
    pub fn get(&self, id: &str) -> Option<&FunctionRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn index(&self) -> HashMap<&str, &FunctionRecord> {
        self.records.iter().map(|r| (r.id.as_str(), r)).collect()
    }

    pub fn by_name(&self, name: &str) -> Option<&FunctionRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

fn build_globset(patterns: &[String]) -> Result<GlobSet, CorpusError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|source| CorpusError::BadGlob { glob: p.clone(), source })?;
        builder.add(glob);
    }
    builder.build().map_err(|source| CorpusError::BadGlob { glob: patterns.join(","), source })
}

fn source_files(root: &Path, exclude: &GlobSet) -> Vec<(PathBuf, String)> {
    let mut files: Vec<(PathBuf, String)> = WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git")
        .filter_map(|e| match e {
            Ok(e) => Some(e),
            Err(err) => {
                log::warn!("skipping unreadable entry: {err}");
                None
            }
        })
        .filter(|e| e.file_type().is_file())
        .filter(|e| e.path().extension().and_then(|x| x.to_str()).is_some_and(|x| SOURCE_EXTENSIONS.contains(&x)))
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?;
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            (!exclude.is_match(&rel)).then(|| (e.path().to_path_buf(), rel))
        })
        .collect();
    files.sort_by(|a, b| a.1.cmp(&b.1));
    files
}

/// Whitespace-insensitive form used for ids.
fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn record_id(file_path: &str, name: &str, source_text: &str, ordinal: usize) -> String {
    let mut h = Sha256::new();
    h.update(file_path.as_bytes());
    h.update([0]);
    h.update(name.as_bytes());
    h.update([0]);
    h.update(normalize(source_text).as_bytes());
    if ordinal > 0 {
        h.update([0]);
        h.update(ordinal.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

struct FileResult {
    records: Vec<FunctionRecord>,
    stats: ExtractionStats,
}

fn extract_file(path: &Path, rel: &str, config: &ExtractionConfig) -> FileResult {
    let mut stats = ExtractionStats { files_scanned: 1, ..Default::default() };
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(err) => {
            log::warn!("cannot read {}: {err}", path.display());
            stats.files_unreadable = 1;
            return FileResult { records: Vec::new(), stats };
        }
    };
    let mut records = Vec::new();
    for f in extract::find_functions(&bytes) {
        stats.functions_found += 1;
        let Ok(text) = std::str::from_utf8(&bytes[f.start..f.end]) else {
            log::warn!("{rel}:{}: `{}` is not valid UTF-8, skipped", f.start_line, f.name);
            stats.non_utf8 += 1;
            continue;
        };
        let token_count = count_tokens(text);
        if token_count < config.min_tokens {
            stats.below_min += 1;
            continue;
        }
        if token_count > config.max_tokens {
            stats.above_max += 1;
            continue;
        }
        records.push(FunctionRecord {
            id: String::new(),
            file_path: rel.to_string(),
            start_line: f.start_line,
            end_line: f.end_line,
            byte_span: (f.start, f.end),
            name: f.name,
            source_text: text.to_string(),
            token_count,
        });
    }
    FileResult { records, stats }
}

/// Best-effort VCS revision of `root`.
pub fn detect_commit(root: &Path) -> String {
    std::process::Command::new("git")
        .arg("-C")
        .arg(root)
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Extract every function definition under `project_root` whose token count
/// lies within the configured bounds.
pub fn extract_functions(project_root: &Path, config: &ExtractionConfig) -> Result<CorpusSnapshot, CorpusError> {
    if !project_root.is_dir() {
        return Err(CorpusError::MissingRoot(project_root.to_path_buf()));
    }
    if config.min_tokens == 0 || config.min_tokens > config.max_tokens {
        return Err(CorpusError::InvalidBounds { min: config.min_tokens, max: config.max_tokens });
    }
    let exclude = build_globset(&config.exclude)?;
    let files = source_files(project_root, &exclude);

    let per_file: Vec<FileResult> = files.par_iter().map(|(path, rel)| extract_file(path, rel, config)).collect();

    let mut stats = ExtractionStats::default();
    let mut records = Vec::new();
    for fr in per_file {
        stats.files_scanned += fr.stats.files_scanned;
        stats.files_unreadable += fr.stats.files_unreadable;
        stats.functions_found += fr.stats.functions_found;
        stats.below_min += fr.stats.below_min;
        stats.above_max += fr.stats.above_max;
        stats.non_utf8 += fr.stats.non_utf8;
        records.extend(fr.records);
    }
    if stats.functions_found == 0 {
        return Err(CorpusError::NoFunctions(project_root.to_path_buf()));
    }
    records.sort_by(|a, b| (&a.file_path, a.start_line).cmp(&(&b.file_path, b.start_line)));

    // Identical definitions (e.g. #ifdef variants) get an ordinal suffix in
    // file order, which keeps ids unique and stable.
    let mut seen: HashMap<String, usize> = HashMap::new();
    for r in &mut records {
        let base = record_id(&r.file_path, &r.name, &r.source_text, 0);
        let n = seen.entry(base.clone()).or_insert(0);
        r.id = if *n == 0 { base } else { record_id(&r.file_path, &r.name, &r.source_text, *n) };
        *n += 1;
    }

    let project_name = project_root
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "project".to_string());

    Ok(CorpusSnapshot {
        project_name,
        commit_id: detect_commit(project_root),
        extraction_config: config.clone(),
        stats,
        records,
    })
}
