//! Command-line front end. Each subcommand runs one stage over JSON-lines
//! artifacts; `run` chains all of them.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use funcbench::adapter::ProjectAdapter;
use funcbench::compile::{compile_all, compute_s1, CompileOutcome, PoolConfig, ProbeCache};
use funcbench::corpus::{extract_functions, load_corpus, save_corpus, CorpusSnapshot, CorpusStore, ExtractionConfig};
use funcbench::jsonl::{read_jsonl, write_jsonl};
use funcbench::llm::{
    contamination_probe, generate_batch, render_prompt, GenerationResult, LiveBackend, LiveConfig, ModelBackend,
    PromptTemplate, ReplayBackend, RetryPolicy,
};
use funcbench::patch::{apply_patch, revert_patch, PatchEntry, PatchSet};
use funcbench::pipeline::{compile_tasks, model_delta, run_pipeline, success_entries, PipelineConfig};
use funcbench::report::{emit_report, fmt_final, fmt_raw, score, sha256_file, ModelReport, RunManifest, Weights};
use funcbench::sanitizer::fuzz::{run_fuzz_campaign, FuzzSettings, FuzzerAdapter};
use funcbench::sanitizer::{
    category_counts, compute_s3, dedupe_alerts, parse_sanitizer_logs, AlertSource, ParseOptions, RunRef, SanitizerAlert,
};
use funcbench::suite::{compute_s2, default_batch_size, run_test_campaign, NaPolicy, TestCampaign, TestIteration};

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "funcbench", version, about = "Function-rewrite benchmark for C/C++ projects")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract eligible functions into a corpus store.
    Extract {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, default_value_t = 10)]
        min_tokens: usize,
        #[arg(long, default_value_t = 256)]
        max_tokens: usize,
        /// Glob over project-relative paths to skip; repeatable.
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ask one model for a rewrite of every corpus function.
    Generate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: String,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Prompt template (TOML with `system` and `user`).
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_in_flight: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a plan of patch entries to a workspace, or undo it.
    Patch {
        #[arg(long)]
        workspace: PathBuf,
        /// JSON lines of patch entries.
        #[arg(long, required_unless_present = "revert")]
        plan: Option<PathBuf>,
        /// Revert using the journal next to the workspace.
        #[arg(long)]
        revert: bool,
    },
    /// Classify each generation as success, failure or unrelated.
    Compile {
        #[arg(long)]
        adapter: PathBuf,
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        generations: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// JSON cache of probe results, read and updated.
        #[arg(long)]
        probe_cache: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the functional test campaign over compilable rewrites.
    Test {
        #[arg(long)]
        adapter: PathBuf,
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        generations: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, default_value_t = 1000)]
        iterations: u64,
        /// `auto` or a number.
        #[arg(long, default_value = "auto")]
        batch_size: String,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse sanitizer logs under a directory into unique alerts.
    Triage {
        #[arg(long)]
        logs: PathBuf,
        #[arg(long, default_value_t = 0.69)]
        penalty: f64,
        #[arg(long, default_value_t = 0.5)]
        leak_factor: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fuzz the first valid test iterations with an external fuzzer.
    Fuzz {
        #[arg(long)]
        adapter: PathBuf,
        #[arg(long)]
        fuzzer: PathBuf,
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        generations: PathBuf,
        #[arg(long)]
        outcomes: PathBuf,
        /// Test iterations (JSON lines) to draw batches from.
        #[arg(long)]
        test_iterations: PathBuf,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 50_000)]
        budget: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one or more models and write the report bundle.
    Score {
        #[arg(long)]
        corpus: PathBuf,
        /// One per model, in the same order for every artifact flag.
        #[arg(long, required = true)]
        generations: Vec<PathBuf>,
        #[arg(long, required = true)]
        outcomes: Vec<PathBuf>,
        #[arg(long, required = true)]
        iterations: Vec<PathBuf>,
        #[arg(long, required = true)]
        alerts: Vec<PathBuf>,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contamination probe: does the model recognize the project?
    Probe {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: String,
        #[command(flatten)]
        backend: BackendArgs,
        /// Word whose presence in an answer counts as recognition.
        #[arg(long)]
        keyword: String,
        /// Probe at most this many functions.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage end to end for one or more models.
    Run {
        #[arg(long)]
        adapter: PathBuf,
        #[arg(long)]
        project: PathBuf,
        #[arg(long, required = true)]
        model: Vec<String>,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        iterations: u64,
        #[arg(long, default_value = "auto")]
        batch_size: String,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        fuzzer: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        fuzz_iterations: usize,
        #[arg(long, default_value_t = 50_000)]
        fuzz_budget: u64,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Live,
    Replay,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "replay")]
    backend: BackendKind,
    /// Directory of `<function_id>.<model>.txt` recordings.
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    /// Live endpoint config (TOML or JSON).
    #[arg(long)]
    live_config: Option<PathBuf>,
}

#[derive(Args)]
struct ScoringArgs {
    /// Comma-separated w1,w2,w3.
    #[arg(long, default_value = "0.333333333333,0.333333333333,0.333333333333")]
    weights: String,
    #[arg(long, default_value_t = 0.1)]
    wd: f64,
    #[arg(long, default_value_t = 0.69)]
    penalty: f64,
    #[arg(long, default_value_t = 0.5)]
    leak_factor: f64,
    #[arg(long, default_value = "zero")]
    na_policy: NaPolicy,
    #[arg(long, default_value_t = 1.0)]
    delta_threshold: f64,
}

impl ScoringArgs {
    fn weights(&self) -> Result<Weights> {
        let w: Vec<f64> = self.weights.split(',').map(|s| s.trim().parse()).collect::<std::result::Result<_, _>>()?;
        let [w1, w2, w3] = w[..] else { return Err("--weights needs three comma-separated numbers".into()) };
        Ok(Weights { w1, w2, w3, wd: self.wd })
    }
}

fn backend(args: &BackendArgs) -> Result<Box<dyn ModelBackend>> {
    Ok(match args.backend {
        BackendKind::Replay => {
            let dir = args.replay_dir.as_ref().ok_or("--backend replay needs --replay-dir")?;
            Box::new(ReplayBackend::new(dir))
        }
        BackendKind::Live => {
            let path = args.live_config.as_ref().ok_or("--backend live needs --live-config")?;
            Box::new(LiveBackend::new(LiveConfig::load(path)?)?)
        }
    })
}

fn corpus(dir: &Path) -> Result<CorpusSnapshot> {
    Ok(load_corpus(&CorpusStore::new(dir))?)
}

fn batch_size(arg: &str, corpus_size: usize) -> Result<usize> {
    if arg == "auto" {
        Ok(default_batch_size(corpus_size))
    } else {
        Ok(arg.parse().map_err(|_| format!("--batch-size must be `auto` or a number, got `{arg}`"))?)
    }
}

fn pool(jobs: usize) -> PoolConfig {
    PoolConfig { jobs: jobs.max(1), work_dir: None }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Extract { project, min_tokens, max_tokens, exclude, out } => {
            let snap = extract_functions(&project, &ExtractionConfig { min_tokens, max_tokens, exclude })?;
            save_corpus(&snap, &out)?;
            println!(
                "{} functions kept of {} ({} files scanned, {:.1}% filtered)",
                snap.records.len(),
                snap.stats.functions_found,
                snap.stats.files_scanned,
                100.0 * snap.stats.filtered_fraction()
            );
        }
        Cmd::Generate { corpus: dir, model, backend: b, seed, template, max_in_flight, out } => {
            let snap = corpus(&dir)?;
            let template = match template {
                Some(p) => PromptTemplate::from_file(&p)?,
                None => PromptTemplate::improve(),
            };
            let requests = snap
                .records
                .iter()
                .map(|r| render_prompt(r, &template, &model, seed))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let gens = generate_batch(&requests, backend(&b)?.as_ref(), &RetryPolicy::default(), max_in_flight);
            write_jsonl(&out, &gens)?;
            let ok = gens.iter().filter(|g| g.candidate().is_some()).count();
            println!("{ok}/{} responses parsed", gens.len());
        }
        Cmd::Patch { workspace, plan, revert } => {
            if revert {
                let mut set = PatchSet::load_journal(&workspace)?;
                revert_patch(&mut set)?;
                set.save_journal()?;
                println!("reverted {} file(s)", set.files.len());
            } else {
                let entries: Vec<PatchEntry> = read_jsonl(plan.as_deref().expect("clap enforces --plan"))?;
                let set = apply_patch(&workspace, entries)?;
                let journal = set.save_journal()?;
                for c in &set.conflicts {
                    eprintln!("conflict: {} {:?}", c.function_id, c.kind);
                }
                println!("patched {} file(s); journal {}", set.files.len(), journal.display());
                if !set.is_clean() {
                    return Err(format!("{} conflicting entries were not applied", set.conflicts.len()).into());
                }
            }
        }
        Cmd::Compile { adapter, project, corpus: dir, generations, jobs, probe_cache, out } => {
            let adapter = ProjectAdapter::load(&adapter)?;
            let snap = corpus(&dir)?;
            let gens: Vec<GenerationResult> = read_jsonl(&generations)?;
            let probes = match &probe_cache {
                Some(p) => ProbeCache::load(p)?,
                None => ProbeCache::default(),
            };
            let outcomes = compile_all(&adapter, &project, &compile_tasks(&snap, &gens), &pool(jobs), &probes)?;
            if let Some(p) = &probe_cache {
                probes.save(p)?;
            }
            write_jsonl(&out, &outcomes)?;
            println!("s1 = {}", fmt_raw(compute_s1(&outcomes)?));
        }
        Cmd::Test {
            adapter,
            project,
            corpus: dir,
            generations,
            outcomes,
            iterations,
            batch_size: bs,
            master_seed,
            jobs,
            out,
        } => {
            let adapter = ProjectAdapter::load(&adapter)?;
            let snap = corpus(&dir)?;
            let gens: Vec<GenerationResult> = read_jsonl(&generations)?;
            let outs: Vec<CompileOutcome> = read_jsonl(&outcomes)?;
            let entries = success_entries(&snap, &gens, &outs);
            let campaign = TestCampaign { iterations, batch_size: batch_size(&bs, snap.records.len())?, master_seed };
            let its = run_test_campaign(&adapter, &project, &entries, &campaign, &pool(jobs))?;
            write_jsonl(&out, &its)?;
            let na = its.iter().filter(|i| i.pass_rate.is_none()).count();
            println!("s2 = {} ({na} N/A of {})", fmt_raw(compute_s2(&its, NaPolicy::Zero)), its.len());
        }
        Cmd::Triage { logs, penalty, leak_factor, out } => {
            let mut files: Vec<PathBuf> = walkdir::WalkDir::new(&logs)
                .into_iter()
                .filter_map(std::result::Result::ok)
                .filter(|e| e.file_type().is_file())
                .map(|e| e.into_path())
                .collect();
            files.sort();
            let mut all = Vec::new();
            for (i, f) in files.iter().enumerate() {
                let text = String::from_utf8_lossy(&std::fs::read(f)?).into_owned();
                let label = f.strip_prefix(&logs).unwrap_or(f).display().to_string();
                all.extend(parse_sanitizer_logs(
                    &text,
                    &RunRef::new(AlertSource::Test, i as u64, label),
                    &ParseOptions::default(),
                ));
            }
            let unique = dedupe_alerts(all);
            write_jsonl(&out, &unique)?;
            for (cat, n) in category_counts(&unique) {
                println!("{cat:<10} {n}");
            }
            println!(
                "{} unique alerts from {} files; s3 = {}",
                unique.len(),
                files.len(),
                fmt_raw(compute_s3(&unique, penalty, leak_factor))
            );
        }
        Cmd::Fuzz {
            adapter,
            fuzzer,
            project,
            corpus: dir,
            generations,
            outcomes,
            test_iterations,
            iterations,
            budget,
            jobs,
            out,
        } => {
            let adapter = ProjectAdapter::load(&adapter)?;
            let fuzzer = FuzzerAdapter::load(&fuzzer)?;
            let snap = corpus(&dir)?;
            let gens: Vec<GenerationResult> = read_jsonl(&generations)?;
            let outs: Vec<CompileOutcome> = read_jsonl(&outcomes)?;
            let its: Vec<TestIteration> = read_jsonl(&test_iterations)?;
            let model = gens.first().map(|g| g.model_id.clone()).unwrap_or_default();
            let entries: HashMap<String, PatchEntry> =
                success_entries(&snap, &gens, &outs).into_iter().map(|e| (e.function_id.clone(), e)).collect();
            let settings = FuzzSettings { max_iterations: iterations, budget };
            let campaign =
                run_fuzz_campaign(&model, &adapter, &fuzzer, &project, &its, &entries, &settings, &pool(jobs))?;
            std::fs::write(&out, serde_json::to_vec_pretty(&campaign)?)?;
            for (cat, n) in &campaign.counts {
                println!("{cat:<10} {n}");
            }
            println!(
                "total {} over {} iterations ({} skipped)",
                campaign.total,
                campaign.iterations_used,
                campaign.skipped.len()
            );
        }
        Cmd::Score { corpus: dir, generations, outcomes, iterations, alerts, scoring, out } => {
            let n = generations.len();
            if outcomes.len() != n || iterations.len() != n || alerts.len() != n {
                return Err("give --generations, --outcomes, --iterations and --alerts once per model".into());
            }
            let snap = corpus(&dir)?;
            let weights = scoring.weights()?;
            let mut manifest = RunManifest { tool_version: env!("CARGO_PKG_VERSION").into(), ..Default::default() };
            manifest
                .inputs
                .insert("corpus/functions.jsonl".into(), sha256_file(&CorpusStore::new(&dir).functions_path())?);
            let mut reports = Vec::new();
            for i in 0..n {
                for p in [&generations[i], &outcomes[i], &iterations[i], &alerts[i]] {
                    manifest.inputs.insert(p.display().to_string(), sha256_file(p)?);
                }
                let gens: Vec<GenerationResult> = read_jsonl(&generations[i])?;
                let outs: Vec<CompileOutcome> = read_jsonl(&outcomes[i])?;
                let its: Vec<TestIteration> = read_jsonl(&iterations[i])?;
                let unique = dedupe_alerts(read_jsonl::<SanitizerAlert>(&alerts[i])?);
                let model = gens.first().map(|g| g.model_id.clone()).ok_or("empty generations file")?;
                if let Some(it) = its.first() {
                    manifest.seeds.insert(format!("{model}.iteration0"), it.seed);
                }
                let s1 = compute_s1(&outs)?;
                let s2 = compute_s2(&its, scoring.na_policy);
                let s3 = compute_s3(&unique, scoring.penalty, scoring.leak_factor);
                let delta = model_delta(&model, &snap, &gens, &outs, scoring.delta_threshold)?;
                let card = score(s1, s2, s3, delta.d_raw, weights).with_model(&model);
                println!("{model}: final {}", fmt_final(card.final_score));
                reports.push(ModelReport {
                    scorecard: card,
                    excluded: delta.below_threshold,
                    iterations: its,
                    alerts: unique,
                });
            }
            manifest.config = serde_json::json!({
                "weights": weights,
                "penalty_per_alert": scoring.penalty,
                "leak_factor": scoring.leak_factor,
                "na_policy": scoring.na_policy,
                "delta_threshold": scoring.delta_threshold,
            });
            let files = emit_report(&out, &reports, &manifest)?;
            print!("{}", std::fs::read_to_string(&files.leaderboard_md)?);
        }
        Cmd::Probe { corpus: dir, model, backend: b, keyword, limit, out } => {
            let snap = corpus(&dir)?;
            let backend = backend(&b)?;
            let template = PromptTemplate::contamination();
            let mut results = Vec::new();
            for r in snap.records.iter().take(limit.unwrap_or(usize::MAX)) {
                results.push(contamination_probe(r, backend.as_ref(), &template, &model, &keyword)?);
            }
            write_jsonl(&out, &results)?;
            let hits = results.iter().filter(|r| r.recognized).count();
            println!("{hits}/{} answers mention `{keyword}`", results.len());
        }
        Cmd::Run {
            adapter,
            project,
            model,
            backend: b,
            exclude,
            iterations,
            batch_size: bs,
            master_seed,
            seed,
            jobs,
            fuzzer,
            fuzz_iterations,
            fuzz_budget,
            scoring,
            out,
        } => {
            let mut cfg = PipelineConfig::new(&project, ProjectAdapter::load(&adapter)?, model);
            cfg.extraction.exclude = exclude;
            cfg.iterations = iterations;
            cfg.batch_size = if bs == "auto" { None } else { Some(batch_size(&bs, 0)?) };
            cfg.master_seed = master_seed;
            cfg.seed = seed;
            cfg.pool = pool(jobs);
            cfg.weights = scoring.weights()?;
            cfg.penalty_per_alert = scoring.penalty;
            cfg.leak_factor = scoring.leak_factor;
            cfg.na_policy = scoring.na_policy;
            cfg.delta_threshold = scoring.delta_threshold;
            if let Some(f) = fuzzer {
                cfg.fuzz = Some((
                    FuzzerAdapter::load(&f)?,
                    FuzzSettings { max_iterations: fuzz_iterations, budget: fuzz_budget },
                ));
            }
            cfg.out_dir = Some(out);
            let run = run_pipeline(&cfg, backend(&b)?.as_ref())?;
            if let Some(files) = &run.report {
                print!("{}", std::fs::read_to_string(&files.leaderboard_md)?);
            }
        }
    }
    Ok(())
}
