//! Replay canned model responses for the mock project and classify each
//! candidate as Success, Failure or Unrelated.
//!
//!     cargo run --example compile_candidates

use std::path::Path;

use funcbench::adapter::ProjectAdapter;
use funcbench::compile::{compile_all, compute_s1, verify_baseline, PoolConfig, ProbeCache};
use funcbench::corpus::{extract_functions, ExtractionConfig};
use funcbench::llm::{
    generate_batch, render_prompt, stage_named_recordings, PromptTemplate, ReplayBackend, RetryPolicy,
};
use funcbench::pipeline::compile_tasks;

const MODEL: &str = "mock/rewriter-1";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let project = fixtures.join("mock_project");
    let adapter = ProjectAdapter::load(&fixtures.join("mock_adapter.toml"))?;

    let corpus =
        extract_functions(&project, &ExtractionConfig { exclude: vec!["tests/**".into()], ..Default::default() })?;
    let replay = tempfile::tempdir()?;
    stage_named_recordings(&corpus.records, &fixtures.join("mock_responses"), MODEL, replay.path())?;

    let template = PromptTemplate::improve();
    let requests =
        corpus.records.iter().map(|r| render_prompt(r, &template, MODEL, 0)).collect::<Result<Vec<_>, _>>()?;
    let generations = generate_batch(&requests, &ReplayBackend::new(replay.path()), &RetryPolicy::default(), 4);

    let baseline = verify_baseline(&adapter, &project)?;
    println!("baseline built in {:.1}s with {:?}", baseline.build_secs, baseline.toolchain.first());

    let tasks = compile_tasks(&corpus, &generations);
    let pool = PoolConfig { jobs: 4, ..Default::default() };
    let outcomes = compile_all(&adapter, &project, &tasks, &pool, &ProbeCache::default())?;
    for (t, o) in tasks.iter().zip(&outcomes) {
        println!("{:<22} {:<9?} {}", t.record.name, o.verdict, o.log_excerpt);
    }
    println!("s1 = {:.2}", compute_s1(&outcomes)?);
    Ok(())
}
