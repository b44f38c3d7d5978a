//! Patch a chosen batch of candidates into a built copy of the mock project,
//! run its suite once, and show the pass rate and sanitizer alerts.
//!
//!     cargo run --example test_iteration -- mk_vec_get mk_fnv1a mk_fib

use std::path::Path;

use funcbench::adapter::ProjectAdapter;
use funcbench::compile::prepare_built_workspace;
use funcbench::corpus::{extract_functions, ExtractionConfig};
use funcbench::patch::PatchEntry;
use funcbench::sanitizer::dedupe_alerts;
use funcbench::suite::run_test_iteration;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let project = fixtures.join("mock_project");
    let adapter = ProjectAdapter::load(&fixtures.join("mock_adapter.toml"))?;
    let corpus =
        extract_functions(&project, &ExtractionConfig { exclude: vec!["tests/**".into()], ..Default::default() })?;

    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = ["mk_vec_get", "mk_fnv1a", "mk_fib"].map(String::from).to_vec();
    }
    let mut entries = Vec::new();
    for name in &names {
        let rec = corpus.by_name(name).ok_or_else(|| format!("no function named {name}"))?;
        let raw = std::fs::read_to_string(fixtures.join("mock_responses").join(format!("{name}.txt")))?;
        let code = funcbench::llm::parse_response(&raw).ok_or("response has no code")?;
        entries.push(PatchEntry::new(rec, code));
    }

    let (ws, _) = prepare_built_workspace(&adapter, &project, None)?;
    let it = run_test_iteration(&adapter, ws.root(), &entries, 0, 0)?;
    match it.pass_rate {
        Some(r) => println!("pass rate {:.1}%", r * 100.0),
        None => println!("N/A: {}", it.na_reason.as_deref().unwrap_or("?")),
    }
    for a in dedupe_alerts(it.alerts) {
        println!("  {:<9} {:<28} {}", a.category.as_str(), a.kind, a.top_frames.join(" < "));
    }
    Ok(())
}
