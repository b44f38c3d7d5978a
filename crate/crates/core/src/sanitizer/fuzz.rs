//! Extended fuzzing over valid test iterations through an external fuzzer.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use globset::Glob;
use serde::{Deserialize, Serialize};

use super::{
    category_counts, dedupe_alerts, parse_sanitizer_logs, AlertSource, Category, ParseOptions, RunRef, SanitizerAlert,
};
use crate::adapter::{AdapterError, ProjectAdapter};
use crate::compile::{run_pool, HarnessError, PoolConfig};
use crate::exec::run_shell;
use crate::patch::{apply_patch, revert_patch, PatchEntry};
use crate::suite::{IterationStatus, TestIteration};

fn d_timeout() -> u64 {
    3600
}

/// External fuzzer contract. Each command runs in the patched, built
/// workspace with `FUZZ_ITERATION`, `FUZZ_BUDGET`, `FUZZ_SEED`, `WORKSPACE`
/// and `FUZZ_OUT` set; logs matching `log_glob` under `FUZZ_OUT` are parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzerAdapter {
    pub name: String,
    #[serde(default)]
    pub setup_cmd: Option<String>,
    pub run_cmd: String,
    #[serde(default)]
    pub collect_cmd: Option<String>,
    pub log_glob: String,
    #[serde(default = "d_timeout")]
    pub timeout_secs: u64,
}

impl FuzzerAdapter {
    pub fn load(path: &Path) -> Result<Self, AdapterError> {
        let read_err = |reason: String| AdapterError::Read { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let f: FuzzerAdapter = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| read_err(e.to_string()))?
        };
        Glob::new(&f.log_glob).map_err(|e| AdapterError::Invalid(format!("log_glob: {e}")))?;
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedIteration {
    pub iteration_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzCampaign {
    pub model_id: String,
    pub iterations_used: usize,
    pub inputs_per_iteration: u64,
    pub counts: BTreeMap<Category, usize>,
    pub total: usize,
    pub skipped: Vec<SkippedIteration>,
    /// Campaign-wide unique alerts, sorted by dedup key.
    pub alerts: Vec<SanitizerAlert>,
}

impl FuzzCampaign {
    pub fn from_alerts(
        model_id: &str,
        iterations_used: usize,
        inputs_per_iteration: u64,
        alerts: Vec<SanitizerAlert>,
        skipped: Vec<SkippedIteration>,
    ) -> Self {
        let alerts = dedupe_alerts(alerts);
        let counts = category_counts(&alerts);
        FuzzCampaign {
            model_id: model_id.to_string(),
            iterations_used,
            inputs_per_iteration,
            total: counts.values().sum(),
            counts,
            skipped,
            alerts,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FuzzSettings {
    /// Take the first `max_iterations` valid iterations by index.
    pub max_iterations: usize,
    /// Mutated inputs per iteration, passed as `FUZZ_BUDGET`.
    pub budget: u64,
}

impl Default for FuzzSettings {
    fn default() -> Self {
        FuzzSettings { max_iterations: 500, budget: 50_000 }
    }
}

/// Parse every `log_glob` match under `out_dir`, in path order.
pub fn collect_fuzz_logs(out_dir: &Path, log_glob: &str, iteration: u64) -> std::io::Result<Vec<SanitizerAlert>> {
    let matcher = Glob::new(log_glob).map_err(std::io::Error::other)?.compile_matcher();
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(out_dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter(|e| e.path().strip_prefix(out_dir).is_ok_and(|rel| matcher.is_match(rel)))
        .map(|e| e.into_path())
        .collect();
    files.sort();
    let mut alerts = Vec::new();
    for f in files {
        let text = String::from_utf8_lossy(&std::fs::read(&f)?).into_owned();
        let label = format!("fuzz:{iteration}:{}", f.strip_prefix(out_dir).unwrap_or(&f).display());
        let run = RunRef::new(AlertSource::Fuzz, iteration, label);
        alerts.extend(parse_sanitizer_logs(&text, &run, &ParseOptions::default()));
    }
    Ok(alerts)
}

/// Run the fuzzer against one already-patched, built workspace.
fn fuzz_one(
    fuzzer: &FuzzerAdapter,
    workspace: &Path,
    iteration: &TestIteration,
    budget: u64,
) -> Result<Vec<SanitizerAlert>, String> {
    let out_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let env = vec![
        ("FUZZ_ITERATION".to_string(), iteration.iteration_index.to_string()),
        ("FUZZ_BUDGET".to_string(), budget.to_string()),
        ("FUZZ_SEED".to_string(), iteration.seed.to_string()),
        ("WORKSPACE".to_string(), workspace.display().to_string()),
        ("FUZZ_OUT".to_string(), out_dir.path().display().to_string()),
    ];
    let timeout = Some(Duration::from_secs(fuzzer.timeout_secs));
    let steps = [
        ("setup", fuzzer.setup_cmd.as_deref()),
        ("run", Some(fuzzer.run_cmd.as_str())),
        ("collect", fuzzer.collect_cmd.as_deref()),
    ];
    for (stage, cmd) in steps {
        let Some(cmd) = cmd.filter(|c| !c.trim().is_empty()) else { continue };
        let out = run_shell(cmd, workspace, &env, timeout).map_err(|e| format!("{stage}: {e}"))?;
        if out.timed_out {
            return Err(format!("{stage}: timed out after {} s", fuzzer.timeout_secs));
        }
        if !out.success() {
            let last = out.log.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
            return Err(format!("{stage}: exit {:?}: {last}", out.code));
        }
    }
    collect_fuzz_logs(out_dir.path(), &fuzzer.log_glob, iteration.iteration_index).map_err(|e| e.to_string())
}

/// Fuzz the first `settings.max_iterations` valid iterations of one model.
/// `entries` maps function id to the model's patch entry.
#[allow(clippy::too_many_arguments)]
pub fn run_fuzz_campaign(
    model_id: &str,
    adapter: &ProjectAdapter,
    fuzzer: &FuzzerAdapter,
    project_root: &Path,
    iterations: &[TestIteration],
    entries: &HashMap<String, PatchEntry>,
    settings: &FuzzSettings,
    pool: &PoolConfig,
) -> Result<FuzzCampaign, HarnessError> {
    let mut valid: Vec<&TestIteration> = iterations.iter().filter(|it| it.status == IterationStatus::Ok).collect();
    valid.sort_by_key(|it| it.iteration_index);
    valid.truncate(settings.max_iterations);

    let results = run_pool(adapter, project_root, pool, &valid, |ws, _, it| {
        let batch: Vec<PatchEntry> = it.sampled_ids.iter().filter_map(|id| entries.get(id).cloned()).collect();
        if batch.len() != it.sampled_ids.len() {
            return Ok(Err("sampled function without a patch entry".to_string()));
        }
        let mut set = apply_patch(ws, batch)?;
        let res = if !set.is_clean() {
            Err("patch conflict".to_string())
        } else {
            match adapter.build(ws) {
                Ok(b) if b.success() => fuzz_one(fuzzer, ws, it, settings.budget),
                Ok(_) => Err("build failed".to_string()),
                Err(e) => Err(format!("build: {e}")),
            }
        };
        revert_patch(&mut set)?;
        Ok(res)
    })?;

    let mut alerts = Vec::new();
    let mut skipped = Vec::new();
    for (it, r) in valid.iter().zip(results) {
        match r {
            Ok(a) => alerts.extend(a),
            Err(reason) => {
                log::warn!("fuzz iteration {} skipped: {reason}", it.iteration_index);
                skipped.push(SkippedIteration { iteration_index: it.iteration_index, reason });
            }
        }
    }
    let used = valid.len() - skipped.len();
    Ok(FuzzCampaign::from_alerts(model_id, used, settings.budget, alerts, skipped))
}
