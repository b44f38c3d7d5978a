//! End-to-end run: extract, generate, compile, test, triage, score, report.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adapter::ProjectAdapter;
use crate::compile::{
    compile_all, compute_s1, verify_baseline, BaselineBuild, CompileOutcome, CompileTask, HarnessError, PoolConfig,
    ProbeCache, Verdict,
};
use crate::corpus::{extract_functions, save_corpus, CorpusError, CorpusSnapshot, ExtractionConfig};
use crate::jsonl::write_jsonl;
use crate::llm::{
    generate_batch, render_prompt, GatewayError, GenerationResult, GenerationStatus, ModelBackend, PromptTemplate,
    RetryPolicy,
};
use crate::patch::PatchEntry;
use crate::report::{
    aggregate_delta, emit_report, score, DeltaReport, ModelReport, ReportFiles, RunManifest, ScoreCard, Weights,
    DEFAULT_DELTA_THRESHOLD,
};
use crate::sanitizer::fuzz::{run_fuzz_campaign, FuzzCampaign, FuzzSettings, FuzzerAdapter};
use crate::sanitizer::{compute_s3, dedupe_alerts, SanitizerAlert, DEFAULT_LEAK_FACTOR};
use crate::suite::{
    compute_s2, default_batch_size, run_baseline_tests, run_test_campaign, BaselineReport, NaPolicy, TestCampaign,
    TestIteration,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Score(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub project_root: PathBuf,
    pub adapter: ProjectAdapter,
    pub extraction: ExtractionConfig,
    pub template: PromptTemplate,
    pub models: Vec<String>,
    pub seed: u64,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
    pub iterations: u64,
    /// `None` means `round(0.01 * corpus size)`.
    pub batch_size: Option<usize>,
    pub master_seed: u64,
    pub pool: PoolConfig,
    pub penalty_per_alert: f64,
    pub leak_factor: f64,
    pub weights: Weights,
    pub na_policy: NaPolicy,
    pub delta_threshold: f64,
    pub fuzz: Option<(FuzzerAdapter, FuzzSettings)>,
    /// Where artifacts and the report go; nothing is written if unset.
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(project_root: impl Into<PathBuf>, adapter: ProjectAdapter, models: Vec<String>) -> Self {
        PipelineConfig {
            project_root: project_root.into(),
            adapter,
            extraction: ExtractionConfig::default(),
            template: PromptTemplate::improve(),
            models,
            seed: 0,
            retry: RetryPolicy::default(),
            max_in_flight: 4,
            iterations: 1000,
            batch_size: None,
            master_seed: 0,
            pool: PoolConfig::default(),
            penalty_per_alert: 0.69,
            leak_factor: DEFAULT_LEAK_FACTOR,
            weights: Weights::default(),
            na_policy: NaPolicy::Zero,
            delta_threshold: DEFAULT_DELTA_THRESHOLD,
            fuzz: None,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelRun {
    pub model_id: String,
    pub generations: Vec<GenerationResult>,
    pub outcomes: Vec<CompileOutcome>,
    pub iterations: Vec<TestIteration>,
    /// Unique alerts pooled from compile and test logs.
    pub alerts: Vec<SanitizerAlert>,
    pub delta: DeltaReport,
    pub scorecard: ScoreCard,
    pub fuzz: Option<FuzzCampaign>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub corpus: CorpusSnapshot,
    pub baseline_build: BaselineBuild,
    pub baseline_tests: BaselineReport,
    pub batch_size: usize,
    pub models: Vec<ModelRun>,
    pub report: Option<ReportFiles>,
}

/// One compile task per generation that produced a response. Backend
/// failures get no verdict.
pub fn compile_tasks(corpus: &CorpusSnapshot, generations: &[GenerationResult]) -> Vec<CompileTask> {
    let index = corpus.index();
    generations
        .iter()
        .filter(|g| g.status != GenerationStatus::BackendError)
        .filter_map(|g| match index.get(g.function_id.as_str()) {
            Some(r) => Some(CompileTask { record: (*r).clone(), candidate: g.candidate().map(str::to_string) }),
            None => {
                log::warn!("generation for unknown function {} ignored", g.function_id);
                None
            }
        })
        .collect()
}

/// Patch entries for every Success outcome, in corpus order.
pub fn success_entries(
    corpus: &CorpusSnapshot,
    generations: &[GenerationResult],
    outcomes: &[CompileOutcome],
) -> Vec<PatchEntry> {
    let ok: HashMap<&str, ()> =
        outcomes.iter().filter(|o| o.verdict == Verdict::Success).map(|o| (o.function_id.as_str(), ())).collect();
    let cands: HashMap<&str, &str> =
        generations.iter().filter_map(|g| g.candidate().map(|c| (g.function_id.as_str(), c))).collect();
    corpus
        .records
        .iter()
        .filter(|r| ok.contains_key(r.id.as_str()))
        .filter_map(|r| cands.get(r.id.as_str()).map(|c| PatchEntry::new(r, *c)))
        .collect()
}

/// Compile-log and test-log alerts, pooled and deduplicated.
pub fn pooled_alerts(outcomes: &[CompileOutcome], iterations: &[TestIteration]) -> Vec<SanitizerAlert> {
    dedupe_alerts(
        outcomes
            .iter()
            .flat_map(|o| o.alerts.iter().cloned())
            .chain(iterations.iter().flat_map(|i| i.alerts.iter().cloned())),
    )
}

/// Dissimilarity over parsed generations whose function takes part in the
/// build (Unrelated verdicts are left out).
pub fn model_delta(
    model_id: &str,
    corpus: &CorpusSnapshot,
    generations: &[GenerationResult],
    outcomes: &[CompileOutcome],
    threshold: f64,
) -> Result<DeltaReport, String> {
    let index = corpus.index();
    let unrelated: HashMap<&str, ()> =
        outcomes.iter().filter(|o| o.verdict == Verdict::Unrelated).map(|o| (o.function_id.as_str(), ())).collect();
    let pairs = generations.iter().filter(|g| !unrelated.contains_key(g.function_id.as_str())).filter_map(|g| {
        let cand = g.candidate()?;
        let rec = index.get(g.function_id.as_str())?;
        Some((g.function_id.as_str(), rec.source_text.as_str(), cand))
    });
    aggregate_delta(model_id, pairs, threshold)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    project_root: &'a Path,
    adapter: &'a ProjectAdapter,
    extraction: &'a ExtractionConfig,
    models: &'a [String],
    seed: u64,
    iterations: u64,
    batch_size: usize,
    master_seed: u64,
    penalty_per_alert: f64,
    leak_factor: f64,
    weights: Weights,
    na_policy: NaPolicy,
    delta_threshold: f64,
}

/// Run every stage for every model.
pub fn run_pipeline(cfg: &PipelineConfig, backend: &dyn ModelBackend) -> Result<PipelineRun, PipelineError> {
    cfg.template.validate()?;
    let corpus = extract_functions(&cfg.project_root, &cfg.extraction)?;
    log::info!("{} functions in corpus ({} found)", corpus.records.len(), corpus.stats.functions_found);
    let baseline_build = verify_baseline(&cfg.adapter, &cfg.project_root)?;
    let baseline_tests = run_baseline_tests(&cfg.adapter, &cfg.project_root)?;
    let batch_size = cfg.batch_size.unwrap_or_else(|| default_batch_size(corpus.records.len()));
    let probes = ProbeCache::default();

    let mut manifest = RunManifest { tool_version: env!("CARGO_PKG_VERSION").to_string(), ..Default::default() };
    if let Some(out) = &cfg.out_dir {
        let store = save_corpus(&corpus, &out.join("corpus"))?;
        manifest.inputs.insert("corpus/functions.jsonl".into(), crate::report::sha256_file(&store.functions_path())?);
    }
    manifest.inputs.insert("adapter".into(), sha256_hex(&serde_json::to_vec(&cfg.adapter).unwrap_or_default()));
    manifest
        .inputs
        .insert("template".into(), sha256_hex(format!("{}\0{}", cfg.template.system, cfg.template.user).as_bytes()));
    manifest.seeds.insert("generation".into(), cfg.seed);
    manifest.seeds.insert("master".into(), cfg.master_seed);

    let mut models = Vec::new();
    for model_id in &cfg.models {
        let requests = corpus
            .records
            .iter()
            .map(|r| render_prompt(r, &cfg.template, model_id, cfg.seed))
            .collect::<Result<Vec<_>, _>>()?;
        let generations = generate_batch(&requests, backend, &cfg.retry, cfg.max_in_flight);

        let tasks = compile_tasks(&corpus, &generations);
        let outcomes = compile_all(&cfg.adapter, &cfg.project_root, &tasks, &cfg.pool, &probes)?;
        let s1 = compute_s1(&outcomes)?;

        let entries = success_entries(&corpus, &generations, &outcomes);
        let campaign = TestCampaign { iterations: cfg.iterations, batch_size, master_seed: cfg.master_seed };
        let iterations = run_test_campaign(&cfg.adapter, &cfg.project_root, &entries, &campaign, &cfg.pool)?;
        let s2 = compute_s2(&iterations, cfg.na_policy);

        let alerts = pooled_alerts(&outcomes, &iterations);
        let s3 = compute_s3(&alerts, cfg.penalty_per_alert, cfg.leak_factor);

        let delta = model_delta(model_id, &corpus, &generations, &outcomes, cfg.delta_threshold)
            .map_err(PipelineError::Score)?;
        let scorecard = score(s1, s2, s3, delta.d_raw, cfg.weights).with_model(model_id.clone());
        log::info!("{model_id}: s1 {s1:.2} s2 {s2:.2} s3 {s3:.2} final {:.1}", scorecard.final_score);

        let fuzz = match &cfg.fuzz {
            Some((fuzzer, settings)) => {
                let by_id: HashMap<String, PatchEntry> =
                    entries.iter().map(|e| (e.function_id.clone(), e.clone())).collect();
                Some(run_fuzz_campaign(
                    model_id,
                    &cfg.adapter,
                    fuzzer,
                    &cfg.project_root,
                    &iterations,
                    &by_id,
                    settings,
                    &cfg.pool,
                )?)
            }
            None => None,
        };

        if let Some(out) = &cfg.out_dir {
            let slug = crate::report::model_slug(model_id);
            let gen_path = out.join(format!("generations.{slug}.jsonl"));
            write_jsonl(&gen_path, &generations)?;
            manifest.inputs.insert(format!("generations.{slug}.jsonl"), crate::report::sha256_file(&gen_path)?);
            write_jsonl(&out.join(format!("outcomes.{slug}.jsonl")), &outcomes)?;
            write_jsonl(&out.join(format!("iterations.{slug}.jsonl")), &iterations)?;
            write_jsonl(&out.join(format!("alerts.{slug}.jsonl")), &alerts)?;
            if let Some(f) = &fuzz {
                std::fs::write(
                    out.join(format!("campaign.{slug}.json")),
                    serde_json::to_vec_pretty(f).map_err(std::io::Error::other)?,
                )?;
            }
        }

        models.push(ModelRun {
            model_id: model_id.clone(),
            generations,
            outcomes,
            iterations,
            alerts,
            delta,
            scorecard,
            fuzz,
        });
    }

    let report = match &cfg.out_dir {
        Some(out) => {
            manifest.config = serde_json::to_value(ConfigEcho {
                project_root: &cfg.project_root,
                adapter: &cfg.adapter,
                extraction: &cfg.extraction,
                models: &cfg.models,
                seed: cfg.seed,
                iterations: cfg.iterations,
                batch_size,
                master_seed: cfg.master_seed,
                penalty_per_alert: cfg.penalty_per_alert,
                leak_factor: cfg.leak_factor,
                weights: cfg.weights,
                na_policy: cfg.na_policy,
                delta_threshold: cfg.delta_threshold,
            })
            .unwrap_or_default();
            let reports: Vec<ModelReport> = models
                .iter()
                .map(|m| ModelReport {
                    scorecard: m.scorecard.clone(),
                    excluded: m.delta.below_threshold,
                    iterations: m.iterations.clone(),
                    alerts: m.alerts.clone(),
                })
                .collect();
            Some(emit_report(&out.join("report"), &reports, &manifest)?)
        }
        None => None,
    };

    Ok(PipelineRun { corpus, baseline_build, baseline_tests, batch_size, models, report })
}

/// Unique-alert tallies per model, for quick summaries.
pub fn alert_summary(run: &PipelineRun) -> BTreeMap<String, usize> {
    run.models.iter().map(|m| (m.model_id.clone(), m.alerts.len())).collect()
}
