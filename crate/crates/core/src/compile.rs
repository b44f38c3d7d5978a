//! Metric I: rebuild the project with one function replaced at a time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapter::ProjectAdapter;
use crate::corpus::FunctionRecord;
use crate::exec::{bounded_excerpt, CommandOutput};
use crate::patch::{apply_patch, prepare_workspace_in, revert_patch, PatchConflict, PatchEntry, PatchError, Workspace};
use crate::sanitizer::{parse_sanitizer_logs, AlertSource, ParseOptions, RunRef, SanitizerAlert};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("baseline {stage} failed:\n{log}")]
    Baseline { stage: String, log: String },
    #[error("test log could not be parsed by `{parser}`:\n{excerpt}")]
    UnparseableSuite { parser: String, excerpt: String },
    #[error("score undefined: {0}")]
    UndefinedScore(String),
    #[error("batch size {k} exceeds the {available} compilable functions; use a smaller batch size")]
    BatchTooLarge { k: usize, available: usize },
    #[error("patch conflicts: {0:?}")]
    Conflict(Vec<PatchConflict>),
    #[error("workspace integrity check failed after {tasks} tasks:\n{log}")]
    Integrity { tasks: usize, log: String },
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shared settings for a pool of build workspaces.
#[derive(Debug, Clone)]
pub struct PoolConfig {
    pub jobs: usize,
    /// Parent directory for scratch workspaces; the system temp dir if unset.
    pub work_dir: Option<PathBuf>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig { jobs: 1, work_dir: None }
    }
}

/// Copy the tree, configure and build it; a failing build is a baseline error.
pub fn prepare_built_workspace(
    adapter: &ProjectAdapter,
    project_root: &Path,
    work_dir: Option<&Path>,
) -> Result<(Workspace, CommandOutput), HarnessError> {
    let parent = work_dir.map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir);
    let ws = prepare_workspace_in(project_root, &parent)?;
    if let Some(out) = adapter.configure(ws.root())? {
        if !out.success() {
            return Err(HarnessError::Baseline {
                stage: "configure".into(),
                log: bounded_excerpt(&out.log, adapter.log_limit_bytes),
            });
        }
    }
    let out = adapter.build(ws.root())?;
    if !out.success() {
        return Err(HarnessError::Baseline {
            stage: "build".into(),
            log: bounded_excerpt(&out.log, adapter.log_limit_bytes),
        });
    }
    Ok((ws, out))
}

/// Run `f` over `tasks` on `pool.jobs` built workspaces. Results keep task
/// order. Every `adapter.full_rebuild_every` tasks a worker does a clean
/// rebuild of its (reverted) tree as an integrity check.
pub(crate) fn run_pool<T, R, F>(
    adapter: &ProjectAdapter,
    project_root: &Path,
    pool: &PoolConfig,
    tasks: &[T],
    f: F,
) -> Result<Vec<R>, HarnessError>
where
    T: Sync,
    R: Send,
    F: Fn(&Path, usize, &T) -> Result<R, HarnessError> + Sync,
{
    if tasks.is_empty() {
        return Ok(Vec::new());
    }
    let workers = pool.jobs.clamp(1, tasks.len());
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    let first_error: Mutex<Option<HarnessError>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let fail = |e: HarnessError| {
                    failed.store(true, Ordering::SeqCst);
                    first_error.lock().unwrap().get_or_insert(e);
                };
                let ws = match prepare_built_workspace(adapter, project_root, pool.work_dir.as_deref()) {
                    Ok((ws, _)) => ws,
                    Err(e) => return fail(e),
                };
                let mut done = 0usize;
                while !failed.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= tasks.len() {
                        break;
                    }
                    match f(ws.root(), i, &tasks[i]) {
                        Ok(r) => results.lock().unwrap()[i] = Some(r),
                        Err(e) => return fail(e),
                    }
                    done += 1;
                    if done.is_multiple_of(adapter.full_rebuild_every) {
                        match adapter.full_build(ws.root()) {
                            Ok(out) if out.success() => {}
                            Ok(out) => {
                                return fail(HarnessError::Integrity {
                                    tasks: done,
                                    log: bounded_excerpt(&out.log, adapter.log_limit_bytes),
                                })
                            }
                            Err(e) => return fail(e.into()),
                        }
                    }
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results.into_inner().unwrap().into_iter().map(|r| r.expect("every task ran")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineBuild {
    pub project: String,
    pub toolchain: Vec<(String, String)>,
    pub build_secs: f64,
}

/// Configure and build an unmodified copy of the tree with the adapter's
/// sanitizer environment. Any failure aborts the campaign.
pub fn verify_baseline(adapter: &ProjectAdapter, project_root: &Path) -> Result<BaselineBuild, HarnessError> {
    let started = Instant::now();
    let (ws, _) = prepare_built_workspace(adapter, project_root, None)?;
    let build_secs = started.elapsed().as_secs_f64();
    Ok(BaselineBuild { project: adapter.name.clone(), toolchain: adapter.toolchain_versions(ws.root()), build_secs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Success,
    Failure,
    Unrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileOutcome {
    pub function_id: String,
    pub verdict: Verdict,
    /// First diagnostic line of a failed build, empty otherwise.
    pub log_excerpt: String,
    #[serde(default)]
    pub timed_out: bool,
    pub duration_ms: u64,
    pub alerts: Vec<SanitizerAlert>,
}

/// Probe results per function id: `true` means the function is not compiled.
#[derive(Debug, Default)]
pub struct ProbeCache {
    map: Mutex<BTreeMap<String, bool>>,
}

impl ProbeCache {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let map = match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(std::io::Error::other)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e),
        };
        Ok(ProbeCache { map: Mutex::new(map) })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let body = serde_json::to_vec_pretty(&*self.map.lock().unwrap()).map_err(std::io::Error::other)?;
        std::fs::write(path, body)
    }

    pub fn get(&self, function_id: &str) -> Option<bool> {
        self.map.lock().unwrap().get(function_id).copied()
    }

    fn insert(&self, function_id: &str, unrelated: bool) {
        self.map.lock().unwrap().insert(function_id.to_string(), unrelated);
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn apply_clean(workspace: &Path, entries: Vec<PatchEntry>) -> Result<crate::patch::PatchSet, HarnessError> {
    let mut set = apply_patch(workspace, entries)?;
    if !set.is_clean() {
        let conflicts = std::mem::take(&mut set.conflicts);
        revert_patch(&mut set)?;
        return Err(HarnessError::Conflict(conflicts));
    }
    Ok(set)
}

/// Build with `replacement` spliced over `record`, then revert.
fn build_with(
    adapter: &ProjectAdapter,
    workspace: &Path,
    record: &FunctionRecord,
    replacement: &str,
) -> Result<CommandOutput, HarnessError> {
    let mut set = apply_clean(workspace, vec![PatchEntry::new(record, replacement)])?;
    let out = adapter.build(workspace);
    revert_patch(&mut set)?;
    Ok(out?)
}

/// Whether replacing `record` with a guaranteed syntax error still builds.
pub fn probe_unrelated(
    adapter: &ProjectAdapter,
    workspace: &Path,
    record: &FunctionRecord,
    cache: &ProbeCache,
) -> Result<bool, HarnessError> {
    if let Some(hit) = cache.get(&record.id) {
        return Ok(hit);
    }
    let out = build_with(adapter, workspace, record, &adapter.probe_text)?;
    let unrelated = out.success();
    cache.insert(&record.id, unrelated);
    Ok(unrelated)
}

fn first_error_line(log: &str) -> String {
    log.lines()
        .find(|l| {
            let l = l.to_ascii_lowercase();
            l.contains("error:") || l.contains("error ")
        })
        .or_else(|| log.lines().rev().find(|l| !l.trim().is_empty()))
        .unwrap_or("")
        .trim()
        .to_string()
}

/// Classify one candidate. `candidate = None` (no code could be parsed from
/// the response) is a Failure unless the function is Unrelated.
pub fn classify_compile(
    adapter: &ProjectAdapter,
    workspace: &Path,
    record: &FunctionRecord,
    candidate: Option<&str>,
    seq: u64,
    probes: &ProbeCache,
) -> Result<CompileOutcome, HarnessError> {
    let started = Instant::now();
    let done = |verdict, log_excerpt: String, timed_out, alerts| CompileOutcome {
        function_id: record.id.clone(),
        verdict,
        log_excerpt,
        timed_out,
        duration_ms: started.elapsed().as_millis() as u64,
        alerts,
    };
    if probe_unrelated(adapter, workspace, record, probes)? {
        return Ok(done(Verdict::Unrelated, String::new(), false, Vec::new()));
    }
    let Some(code) = candidate else {
        return Ok(done(Verdict::Failure, "no candidate code".into(), false, Vec::new()));
    };
    let out = build_with(adapter, workspace, record, code)?;
    let run = RunRef::new(AlertSource::Compile, seq, format!("compile:{}", record.id));
    let alerts = parse_sanitizer_logs(&out.log, &run, &ParseOptions::default());
    Ok(if out.timed_out {
        done(Verdict::Failure, format!("timeout after {} s", adapter.build_timeout_secs), true, alerts)
    } else if out.success() {
        done(Verdict::Success, String::new(), false, alerts)
    } else {
        done(Verdict::Failure, first_error_line(&out.log), false, alerts)
    })
}

#[derive(Debug, Clone)]
pub struct CompileTask {
    pub record: FunctionRecord,
    pub candidate: Option<String>,
}

/// Classify every task across a pool of workspaces. Outcomes keep task order.
pub fn compile_all(
    adapter: &ProjectAdapter,
    project_root: &Path,
    tasks: &[CompileTask],
    pool: &PoolConfig,
    probes: &ProbeCache,
) -> Result<Vec<CompileOutcome>, HarnessError> {
    run_pool(adapter, project_root, pool, tasks, |ws, i, t| {
        let out = classify_compile(adapter, ws, &t.record, t.candidate.as_deref(), i as u64, probes)?;
        log::debug!("compile {} -> {:?}", t.record.name, out.verdict);
        Ok(out)
    })
}

/// `100 * success / (success + failure)`; Unrelated outcomes are ignored.
pub fn compute_s1(outcomes: &[CompileOutcome]) -> Result<f64, HarnessError> {
    let success = outcomes.iter().filter(|o| o.verdict == Verdict::Success).count();
    let failure = outcomes.iter().filter(|o| o.verdict == Verdict::Failure).count();
    if success + failure == 0 {
        return Err(HarnessError::UndefinedScore("no outcome with a Success or Failure verdict".into()));
    }
    Ok(100.0 * success as f64 / (success + failure) as f64)
}
