//! Reversible textual patching of functions inside scratch copies of a tree.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::TempDir;
use thiserror::Error;

use crate::corpus::FunctionRecord;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("{0} is not a directory")]
    MissingRoot(PathBuf),
    #[error("insufficient disk space while preparing workspace at {}", .0.display())]
    DiskFull(PathBuf),
    #[error("unsafe patch path `{0}`")]
    BadPath(String),
    #[error("patch set is not applied")]
    NotApplied,
    #[error("files modified since the patch was applied: {}", .files.join(", "))]
    Integrity { files: Vec<String> },
    #[error("patch journal {}: {reason}", path.display())]
    Journal { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An isolated copy of a project tree. Dropping a temporary workspace deletes it.
#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    _guard: Option<TempDir>,
}

impl Workspace {
    /// Use an existing directory in place; nothing is deleted on drop.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PatchError> {
        let root = root.into();
        if !root.is_dir() {
            return Err(PatchError::MissingRoot(root));
        }
        Ok(Workspace { root, _guard: None })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Keep the directory after drop and return its path.
    pub fn persist(self) -> PathBuf {
        match self._guard {
            Some(g) => g.keep(),
            None => self.root,
        }
    }
}

/// Copy `project_root` (minus `.git`) into a fresh temporary workspace.
pub fn prepare_workspace(project_root: &Path) -> Result<Workspace, PatchError> {
    prepare_workspace_in(project_root, &std::env::temp_dir())
}

pub fn prepare_workspace_in(project_root: &Path, parent: &Path) -> Result<Workspace, PatchError> {
    if !project_root.is_dir() {
        return Err(PatchError::MissingRoot(project_root.to_path_buf()));
    }
    std::fs::create_dir_all(parent)?;
    let guard = tempfile::Builder::new().prefix("funcbench-ws-").tempdir_in(parent)?;
    let dest = guard.path().to_path_buf();
    copy_tree(project_root, &dest).map_err(|e| {
        if e.raw_os_error() == Some(libc::ENOSPC) {
            PatchError::DiskFull(dest.clone())
        } else {
            PatchError::Io(e)
        }
    })?;
    Ok(Workspace { root: dest, _guard: Some(guard) })
}

fn copy_tree(src: &Path, dest: &Path) -> std::io::Result<()> {
    let walker = walkdir::WalkDir::new(src)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || e.file_name() != ".git");
    for entry in walker {
        let entry = entry.map_err(std::io::Error::other)?;
        let rel = entry.path().strip_prefix(src).expect("walk stays under root");
        let target = dest.join(rel);
        let ft = entry.file_type();
        if ft.is_dir() {
            std::fs::create_dir_all(&target)?;
            std::fs::set_permissions(&target, entry.metadata().map_err(std::io::Error::other)?.permissions())?;
        } else if ft.is_symlink() {
            std::os::unix::fs::symlink(std::fs::read_link(entry.path())?, &target)?;
        } else {
            // fs::copy carries permission bits.
            std::fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

/// One function replacement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub function_id: String,
    pub file_path: String,
    pub byte_span: (usize, usize),
    pub original_text: String,
    pub replacement_text: String,
}

impl PatchEntry {
    pub fn new(record: &FunctionRecord, replacement: impl Into<String>) -> Self {
        PatchEntry {
            function_id: record.id.clone(),
            file_path: record.file_path.clone(),
            byte_span: record.byte_span,
            original_text: record.source_text.clone(),
            replacement_text: replacement.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    /// Workspace bytes at the span differ from `original_text`.
    StaleSpan,
    /// Span overlaps another entry in the same file.
    Overlap,
    /// Span lies outside the file.
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConflict {
    pub function_id: String,
    pub file_path: String,
    pub kind: ConflictKind,
}

/// Per-file bookkeeping needed to undo and to detect tampering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchedFile {
    pub file_path: String,
    pub original_sha256: String,
    pub patched_sha256: String,
    /// Indices into `PatchSet::entries`, ascending by original offset.
    pub entries: Vec<usize>,
    /// Where each replacement landed in the patched file.
    pub applied_spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSet {
    pub workspace: PathBuf,
    pub entries: Vec<PatchEntry>,
    pub applied: bool,
    pub files: Vec<PatchedFile>,
    pub conflicts: Vec<PatchConflict>,
}

impl PatchSet {
    pub fn is_clean(&self) -> bool {
        self.conflicts.is_empty()
    }

    pub fn save_journal(&self) -> Result<PathBuf, PatchError> {
        let path = journal_path(&self.workspace);
        let body = serde_json::to_vec_pretty(self)
            .map_err(|e| PatchError::Journal { path: path.clone(), reason: e.to_string() })?;
        write_atomic(&path, &body)?;
        Ok(path)
    }

    pub fn load_journal(workspace: &Path) -> Result<Self, PatchError> {
        let path = journal_path(workspace);
        let bytes = std::fs::read(&path)?;
        serde_json::from_slice(&bytes).map_err(|e| PatchError::Journal { path, reason: e.to_string() })
    }
}

/// `<workspace>.patch-journal.json`, next to the workspace directory.
pub fn journal_path(workspace: &Path) -> PathBuf {
    let mut name = workspace.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "workspace".into());
    name.push(".patch-journal.json");
    workspace.with_file_name(name)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn safe_join(root: &Path, rel: &str) -> Result<PathBuf, PatchError> {
    let p = Path::new(rel);
    if p.components().all(|c| matches!(c, Component::Normal(_))) && !rel.is_empty() {
        Ok(root.join(p))
    } else {
        Err(PatchError::BadPath(rel.to_string()))
    }
}

/// Replace the file through a sibling temp file + rename, keeping permissions.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    if let Ok(meta) = std::fs::metadata(path) {
        tmp.as_file().set_permissions(meta.permissions())?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Splice one file's entries (already sorted by start) into `bytes`.
fn splice(bytes: &[u8], entries: &[&PatchEntry]) -> (Vec<u8>, Vec<(usize, usize)>) {
    let mut out = Vec::with_capacity(bytes.len());
    let mut spans = Vec::with_capacity(entries.len());
    let mut cursor = 0;
    for e in entries {
        let (s, t) = e.byte_span;
        out.extend_from_slice(&bytes[cursor..s]);
        let start = out.len();
        out.extend_from_slice(e.replacement_text.as_bytes());
        spans.push((start, out.len()));
        cursor = t;
    }
    out.extend_from_slice(&bytes[cursor..]);
    (out, spans)
}

/// Apply `entries` to `workspace`. Files with any conflicting entry are left
/// untouched and the conflicts are reported in the returned set.
pub fn apply_patch(workspace: &Path, entries: Vec<PatchEntry>) -> Result<PatchSet, PatchError> {
    let mut by_file: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        safe_join(workspace, &e.file_path)?;
        by_file.entry(e.file_path.as_str()).or_default().push(i);
    }

    let mut files = Vec::new();
    let mut conflicts = Vec::new();
    for (rel, mut idx) in by_file {
        idx.sort_by_key(|&i| (entries[i].byte_span, i));
        let path = safe_join(workspace, rel)?;
        let bytes = std::fs::read(&path)?;

        let mut file_conflicts = Vec::new();
        let mut prev_end = 0usize;
        for (n, &i) in idx.iter().enumerate() {
            let e = &entries[i];
            let (s, t) = e.byte_span;
            let kind = if s > t || t > bytes.len() {
                Some(ConflictKind::OutOfRange)
            } else if n > 0 && s < prev_end {
                Some(ConflictKind::Overlap)
            } else if &bytes[s..t] != e.original_text.as_bytes() {
                Some(ConflictKind::StaleSpan)
            } else {
                None
            };
            if let Some(kind) = kind {
                file_conflicts.push(PatchConflict {
                    function_id: e.function_id.clone(),
                    file_path: rel.to_string(),
                    kind,
                });
            }
            prev_end = prev_end.max(t);
        }
        if !file_conflicts.is_empty() {
            log::warn!("{rel}: {} conflicting patch entries, file left untouched", file_conflicts.len());
            conflicts.extend(file_conflicts);
            continue;
        }

        let ordered: Vec<&PatchEntry> = idx.iter().map(|&i| &entries[i]).collect();
        let (patched, applied_spans) = splice(&bytes, &ordered);
        if patched != bytes {
            write_atomic(&path, &patched)?;
        }
        files.push(PatchedFile {
            file_path: rel.to_string(),
            original_sha256: sha256_hex(&bytes),
            patched_sha256: sha256_hex(&patched),
            entries: idx,
            applied_spans,
        });
    }

    Ok(PatchSet { workspace: workspace.to_path_buf(), entries, applied: true, files, conflicts })
}

/// Restore every file touched by `set`. Refuses (touching nothing) if any of
/// them changed since the patch was applied.
pub fn revert_patch(set: &mut PatchSet) -> Result<(), PatchError> {
    if !set.applied {
        return Err(PatchError::NotApplied);
    }
    let mut current = Vec::with_capacity(set.files.len());
    let mut modified = Vec::new();
    for f in &set.files {
        let path = safe_join(&set.workspace, &f.file_path)?;
        match std::fs::read(&path) {
            Ok(bytes) if sha256_hex(&bytes) == f.patched_sha256 => current.push((path, bytes)),
            _ => modified.push(f.file_path.clone()),
        }
    }
    if !modified.is_empty() {
        return Err(PatchError::Integrity { files: modified });
    }

    for (f, (path, bytes)) in set.files.iter().zip(current) {
        if f.original_sha256 == f.patched_sha256 {
            continue;
        }
        let undo: Vec<PatchEntry> = f
            .entries
            .iter()
            .zip(&f.applied_spans)
            .map(|(&i, &span)| PatchEntry {
                byte_span: span,
                replacement_text: set.entries[i].original_text.clone(),
                ..set.entries[i].clone()
            })
            .collect();
        let undo: Vec<&PatchEntry> = undo.iter().collect();
        let (restored, _) = splice(&bytes, &undo);
        if sha256_hex(&restored) != f.original_sha256 {
            return Err(PatchError::Integrity { files: vec![f.file_path.clone()] });
        }
        write_atomic(&path, &restored)?;
    }
    set.applied = false;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(file: &str, span: (usize, usize), orig: &str, repl: &str) -> PatchEntry {
        PatchEntry {
            function_id: format!("{file}@{}", span.0),
            file_path: file.into(),
            byte_span: span,
            original_text: orig.into(),
            replacement_text: repl.into(),
        }
    }

    fn tree() -> TempDir {
        let d = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(d.path().join("src")).unwrap();
        std::fs::write(d.path().join("src/a.c"), "int a(void){return 1;}\nint b(void){return 2;}\n").unwrap();
        std::fs::write(d.path().join("src/b.c"), "int c(void){return 3;}\n").unwrap();
        d
    }

    #[test]
    fn workspaces_are_disjoint_copies() {
        let src = tree();
        std::fs::create_dir_all(src.path().join(".git")).unwrap();
        std::fs::write(src.path().join(".git/HEAD"), "x").unwrap();
        let a = prepare_workspace(src.path()).unwrap();
        let b = prepare_workspace(src.path()).unwrap();
        assert_ne!(a.root(), b.root());
        assert!(!a.root().join(".git").exists());
        assert_eq!(
            std::fs::read(a.root().join("src/a.c")).unwrap(),
            std::fs::read(src.path().join("src/a.c")).unwrap()
        );

        let mut set =
            apply_patch(a.root(), vec![entry("src/b.c", (0, 22), "int c(void){return 3;}", "int c(void){return 4;}")])
                .unwrap();
        assert!(set.is_clean());
        assert_eq!(std::fs::read_to_string(b.root().join("src/b.c")).unwrap(), "int c(void){return 3;}\n");
        revert_patch(&mut set).unwrap();
        assert_eq!(std::fs::read_to_string(a.root().join("src/b.c")).unwrap(), "int c(void){return 3;}\n");
    }

    #[test]
    fn offsets_shift_for_later_entries() {
        let src = tree();
        let ws = src.path();
        let mut set = apply_patch(
            ws,
            vec![
                entry("src/a.c", (23, 45), "int b(void){return 2;}", "int b(void){ return 20; }"),
                entry("src/a.c", (0, 22), "int a(void){return 1;}", "int a(void)\n{\n  return 10;\n}"),
            ],
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(ws.join("src/a.c")).unwrap(),
            "int a(void)\n{\n  return 10;\n}\nint b(void){ return 20; }\n"
        );
        revert_patch(&mut set).unwrap();
        assert!(!set.applied);
        assert_eq!(
            std::fs::read_to_string(ws.join("src/a.c")).unwrap(),
            "int a(void){return 1;}\nint b(void){return 2;}\n"
        );
    }

    #[test]
    fn stale_span_leaves_whole_file_untouched() {
        let src = tree();
        let ws = src.path();
        let set = apply_patch(
            ws,
            vec![
                entry("src/a.c", (0, 22), "int a(void){return 1;}", "X"),
                entry("src/a.c", (23, 45), "int b(void){return 9;}", "Y"),
                entry("src/b.c", (0, 22), "int c(void){return 3;}", "Z"),
            ],
        )
        .unwrap();
        assert_eq!(set.conflicts.len(), 1);
        assert_eq!(set.conflicts[0].kind, ConflictKind::StaleSpan);
        assert_eq!(
            std::fs::read_to_string(ws.join("src/a.c")).unwrap(),
            "int a(void){return 1;}\nint b(void){return 2;}\n"
        );
        assert_eq!(std::fs::read_to_string(ws.join("src/b.c")).unwrap(), "Z\n");
    }

    #[test]
    fn overlap_is_a_conflict() {
        let src = tree();
        let set = apply_patch(
            src.path(),
            vec![entry("src/a.c", (0, 22), "int a(void){return 1;}", "X"), entry("src/a.c", (4, 5), "a", "Y")],
        )
        .unwrap();
        assert_eq!(set.conflicts.len(), 1);
        assert_eq!(set.conflicts[0].kind, ConflictKind::Overlap);
    }

    #[test]
    fn external_edit_blocks_revert() {
        let src = tree();
        let ws = src.path();
        let mut set =
            apply_patch(ws, vec![entry("src/b.c", (0, 22), "int c(void){return 3;}", "int c(void){return 5;}")])
                .unwrap();
        std::fs::write(ws.join("src/b.c"), "tampered").unwrap();
        match revert_patch(&mut set) {
            Err(PatchError::Integrity { files }) => assert_eq!(files, vec!["src/b.c".to_string()]),
            other => panic!("expected integrity error, got {other:?}"),
        }
        assert!(set.applied);
    }

    #[test]
    fn parent_paths_rejected() {
        let src = tree();
        assert!(matches!(apply_patch(src.path(), vec![entry("../x.c", (0, 0), "", "")]), Err(PatchError::BadPath(_))));
    }

    #[test]
    fn journal_round_trip() {
        let parent = tempfile::tempdir().unwrap();
        let ws = parent.path().join("ws");
        std::fs::create_dir_all(&ws).unwrap();
        std::fs::write(ws.join("f.c"), "int c(void){return 3;}").unwrap();
        let set =
            apply_patch(&ws, vec![entry("f.c", (0, 22), "int c(void){return 3;}", "int c(void){return 7;}")]).unwrap();
        let path = set.save_journal().unwrap();
        assert_eq!(path, parent.path().join("ws.patch-journal.json"));
        let mut loaded = PatchSet::load_journal(&ws).unwrap();
        assert_eq!(loaded, set);
        revert_patch(&mut loaded).unwrap();
        assert_eq!(std::fs::read_to_string(ws.join("f.c")).unwrap(), "int c(void){return 3;}");
    }
}
