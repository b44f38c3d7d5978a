//! Full pipeline on the bundled mock project with two replayed models: a
//! rewriter with canned answers and an echo model that returns each function
//! unchanged (and so falls under the dissimilarity threshold).
//!
//!     cargo run --release --example desk_run -- [out_dir]

use std::path::{Path, PathBuf};
use std::time::Instant;

use funcbench::adapter::ProjectAdapter;
use funcbench::compile::PoolConfig;
use funcbench::corpus::{extract_functions, ExtractionConfig};
use funcbench::llm::{stage_named_recordings, ReplayBackend};
use funcbench::pipeline::{run_pipeline, PipelineConfig};
use funcbench::report::{fmt_final, fmt_raw};
use funcbench::sanitizer::fuzz::{FuzzSettings, FuzzerAdapter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let project = fixtures.join("mock_project");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("funcbench-desk"));
    let extraction = ExtractionConfig { exclude: vec!["tests/**".into()], ..Default::default() };

    // Replay directory: canned answers for the rewriter, originals for echo.
    let replay = tempfile::tempdir()?;
    let corpus = extract_functions(&project, &extraction)?;
    stage_named_recordings(&corpus.records, &fixtures.join("mock_responses"), "mock/rewriter-1", replay.path())?;
    let echo = tempfile::tempdir()?;
    for r in &corpus.records {
        std::fs::write(echo.path().join(format!("{}.txt", r.name)), format!("```c\n{}\n```\n", r.source_text))?;
    }
    stage_named_recordings(&corpus.records, echo.path(), "mock/echo", replay.path())?;

    let adapter = ProjectAdapter::load(&fixtures.join("mock_adapter.toml"))?;
    let mut cfg = PipelineConfig::new(&project, adapter, vec!["mock/rewriter-1".into(), "mock/echo".into()]);
    cfg.extraction = extraction;
    cfg.iterations = 50;
    cfg.batch_size = Some(5);
    cfg.master_seed = 0;
    cfg.pool = PoolConfig { jobs: 4, work_dir: None };
    cfg.fuzz = Some((
        FuzzerAdapter::load(&fixtures.join("mock_fuzzer.toml"))?,
        FuzzSettings { max_iterations: 4, budget: 1000 },
    ));
    cfg.out_dir = Some(out.clone());

    let started = Instant::now();
    let run = run_pipeline(&cfg, &ReplayBackend::new(replay.path()))?;
    println!(
        "{} functions, baseline pass rate {:.2}, batch size {}",
        run.corpus.records.len(),
        run.baseline_tests.pass_rate,
        run.batch_size
    );
    for m in &run.models {
        let c = &m.scorecard;
        let na = m.iterations.iter().filter(|i| i.pass_rate.is_none()).count();
        println!(
            "{:<16} s1 {} s2 {} s3 {} delta {} final {}  (N/A {na}/{}, {} unique alerts{})",
            m.model_id,
            fmt_raw(c.s1),
            fmt_raw(c.s2),
            fmt_raw(c.s3),
            fmt_raw(c.delta_bonus),
            fmt_final(c.final_score),
            m.iterations.len(),
            m.alerts.len(),
            if m.delta.below_threshold { ", excluded" } else { "" }
        );
        if let Some(f) = &m.fuzz {
            println!("  fuzz: {} iterations, {} unique, {:?}", f.iterations_used, f.total, f.counts);
        }
    }
    if let Some(r) = &run.report {
        println!("\n{}", std::fs::read_to_string(&r.leaderboard_md)?);
        println!("report in {}", r.leaderboard_md.parent().unwrap().display());
    }
    println!("finished in {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
