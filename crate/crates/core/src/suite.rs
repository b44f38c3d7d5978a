//! Metric II: seeded batches of compilable replacements run against the
//! project's own test suite.

use std::path::Path;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapter::ProjectAdapter;
use crate::compile::{prepare_built_workspace, run_pool, HarnessError, PoolConfig};
use crate::exec::bounded_excerpt;
use crate::patch::{apply_patch, revert_patch, PatchEntry};
use crate::sanitizer::{parse_sanitizer_logs, AlertSource, ParseOptions, RunRef, SanitizerAlert};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub total_tests: u64,
    pub passed: u64,
    pub pass_rate: f64,
    /// Bounded copy of the suite log.
    pub log: String,
}

/// Build an unmodified copy and run its suite once.
pub fn run_baseline_tests(adapter: &ProjectAdapter, project_root: &Path) -> Result<BaselineReport, HarnessError> {
    let (ws, _) = prepare_built_workspace(adapter, project_root, None)?;
    let out = adapter.test(ws.root())?;
    let log = bounded_excerpt(&out.log, adapter.log_limit_bytes);
    let Some((passed, total_tests)) = adapter.test_parser.parse(&out.log) else {
        return Err(HarnessError::UnparseableSuite {
            parser: adapter.test_parser.name().to_string(),
            excerpt: bounded_excerpt(&out.log, 4096),
        });
    };
    let report = BaselineReport { total_tests, passed, pass_rate: passed as f64 / total_tests as f64, log };
    let exp = &adapter.baseline;
    if exp.total_tests.is_some_and(|t| t != total_tests)
        || exp.pass_rate.is_some_and(|p| (p - report.pass_rate).abs() > 1e-3)
    {
        log::warn!(
            "{}: baseline {}/{} differs from the adapter's expectation {:?}",
            adapter.name,
            passed,
            total_tests,
            exp
        );
    }
    Ok(report)
}

/// `round(0.01 * corpus_size)`, at least 1.
pub fn default_batch_size(corpus_size: usize) -> usize {
    ((corpus_size as f64 * 0.01).round() as usize).max(1)
}

/// Per-iteration seed, independent of scheduling order.
pub fn iteration_seed(master_seed: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(index.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Uniform sample of `k` ids without replacement, returned in input order.
pub fn sample_batch(success_ids: &[String], k: usize, seed: u64) -> Result<Vec<String>, HarnessError> {
    if k > success_ids.len() {
        return Err(HarnessError::BatchTooLarge { k, available: success_ids.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, success_ids.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| success_ids[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IterationStatus {
    Ok,
    Na,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestIteration {
    pub iteration_index: u64,
    pub seed: u64,
    pub sampled_ids: Vec<String>,
    pub pass_rate: Option<f64>,
    pub status: IterationStatus,
    /// Why an iteration is N/A: `build-failure`, `build-timeout`,
    /// `suite-timeout` or `no-parseable-result`.
    #[serde(default)]
    pub na_reason: Option<String>,
    pub alerts: Vec<SanitizerAlert>,
    pub duration_ms: u64,
}

/// Patch the batch in, build, run the suite, and revert.
pub fn run_test_iteration(
    adapter: &ProjectAdapter,
    workspace: &Path,
    entries: &[PatchEntry],
    index: u64,
    seed: u64,
) -> Result<TestIteration, HarnessError> {
    let started = Instant::now();
    let mut set = apply_patch(workspace, entries.to_vec())?;
    if !set.is_clean() {
        let conflicts = std::mem::take(&mut set.conflicts);
        revert_patch(&mut set)?;
        return Err(HarnessError::Conflict(conflicts));
    }
    let run = RunRef::new(AlertSource::Test, index, format!("iteration:{index}"));
    let opts = ParseOptions::default();
    type Outcome = (Option<f64>, Option<&'static str>, Vec<SanitizerAlert>);
    let outcome = (|| -> Result<Outcome, HarnessError> {
        let build = adapter.build(workspace)?;
        let mut alerts = parse_sanitizer_logs(&build.log, &run, &opts);
        if !build.success() {
            let reason = if build.timed_out { "build-timeout" } else { "build-failure" };
            return Ok((None, Some(reason), alerts));
        }
        let mut attempts = 0;
        loop {
            let out = adapter.test(workspace)?;
            alerts.extend(parse_sanitizer_logs(&out.log, &run, &opts));
            if out.timed_out {
                return Ok((None, Some("suite-timeout"), alerts));
            }
            if let Some((passed, total)) = adapter.test_parser.parse(&out.log) {
                return Ok((Some(passed as f64 / total as f64), None, alerts));
            }
            if attempts >= adapter.suite_retries {
                return Ok((None, Some("no-parseable-result"), alerts));
            }
            attempts += 1;
        }
    })();
    revert_patch(&mut set)?;
    let (pass_rate, na_reason, alerts) = outcome?;
    Ok(TestIteration {
        iteration_index: index,
        seed,
        sampled_ids: entries.iter().map(|e| e.function_id.clone()).collect(),
        pass_rate,
        status: if pass_rate.is_some() { IterationStatus::Ok } else { IterationStatus::Na },
        na_reason: na_reason.map(str::to_string),
        alerts,
        duration_ms: started.elapsed().as_millis() as u64,
    })
}

#[derive(Debug, Clone)]
pub struct TestCampaign {
    pub iterations: u64,
    pub batch_size: usize,
    pub master_seed: u64,
}

/// The full schedule: `(seed_i, sampled ids)` for each iteration.
pub fn schedule(success_ids: &[String], campaign: &TestCampaign) -> Result<Vec<(u64, Vec<String>)>, HarnessError> {
    (0..campaign.iterations)
        .map(|i| {
            let seed = iteration_seed(campaign.master_seed, i);
            Ok((seed, sample_batch(success_ids, campaign.batch_size, seed)?))
        })
        .collect()
}

/// Run every scheduled iteration over a workspace pool. `entries` holds one
/// patch entry per compilable function, in a fixed order.
pub fn run_test_campaign(
    adapter: &ProjectAdapter,
    project_root: &Path,
    entries: &[PatchEntry],
    campaign: &TestCampaign,
    pool: &PoolConfig,
) -> Result<Vec<TestIteration>, HarnessError> {
    let ids: Vec<String> = entries.iter().map(|e| e.function_id.clone()).collect();
    let by_id: std::collections::HashMap<&str, &PatchEntry> =
        entries.iter().map(|e| (e.function_id.as_str(), e)).collect();
    let plan = schedule(&ids, campaign)?;
    run_pool(adapter, project_root, pool, &plan, |ws, i, (seed, sampled)| {
        let batch: Vec<PatchEntry> = sampled.iter().map(|id| by_id[id.as_str()].clone()).collect();
        let it = run_test_iteration(adapter, ws, &batch, i as u64, *seed)?;
        log::debug!("iteration {i}: {:?} {:?}", it.status, it.pass_rate);
        Ok(it)
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NaPolicy {
    /// N/A iterations count as pass rate 0.
    #[default]
    Zero,
    /// N/A iterations are left out of the mean.
    Exclude,
}

impl std::str::FromStr for NaPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(NaPolicy::Zero),
            "exclude" => Ok(NaPolicy::Exclude),
            _ => Err(format!("unknown N/A policy `{s}` (zero|exclude)")),
        }
    }
}

/// `100 * mean(pass_rate)`. With `Exclude` and no valid iteration, 0.
pub fn compute_s2(iterations: &[TestIteration], policy: NaPolicy) -> f64 {
    let rates: Vec<f64> = iterations
        .iter()
        .filter_map(|it| match (it.pass_rate, policy) {
            (Some(r), _) => Some(r),
            (None, NaPolicy::Zero) => Some(0.0),
            (None, NaPolicy::Exclude) => None,
        })
        .collect();
    if rates.is_empty() {
        return 0.0;
    }
    100.0 * rates.iter().sum::<f64>() / rates.len() as f64
}
