//! Render prompts for every corpus function and answer them from a replay
//! directory. A `RecordingBackend` copies the answers into a second
//! directory, the way a live run is captured for later replay.
//!
//!     cargo run --example generate_replay

use std::path::Path;

use funcbench::corpus::{extract_functions, ExtractionConfig};
use funcbench::llm::{
    generate_batch, render_prompt, stage_named_recordings, GenerationStatus, PromptTemplate, RecordingBackend,
    ReplayBackend, RetryPolicy,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = "mock/rewriter-1";
    let corpus = extract_functions(
        &fixtures.join("mock_project"),
        &ExtractionConfig { exclude: vec!["tests/**".into()], ..Default::default() },
    )?;

    let replay = tempfile::tempdir()?;
    let staged = stage_named_recordings(&corpus.records, &fixtures.join("mock_responses"), model, replay.path())?;
    println!("staged {staged} recordings for {model}");

    let template = PromptTemplate::improve();
    let requests =
        corpus.records.iter().map(|r| render_prompt(r, &template, model, 0)).collect::<Result<Vec<_>, _>>()?;
    println!("--- system ---\n{}\n--- user (first request) ---\n{}\n", requests[0].system_text, requests[0].user_text);

    let captured = tempfile::tempdir()?;
    let backend = RecordingBackend::new(ReplayBackend::new(replay.path()), captured.path())?;
    let results = generate_batch(&requests, &backend, &RetryPolicy::default(), 8);
    for (r, g) in corpus.records.iter().zip(&results) {
        let lines = g.extracted_code.as_deref().map_or(0, |c| c.lines().count());
        println!("  {:<22} {:?}  {lines} lines", r.name, g.status);
    }
    let ok = results.iter().filter(|g| g.status == GenerationStatus::Ok).count();
    println!("{ok}/{} parsed; {} responses captured", results.len(), std::fs::read_dir(captured.path())?.count());
    Ok(())
}
