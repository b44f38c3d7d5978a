//! Splice a batch of rewrites into a scratch copy of the mock project, show
//! what changed, then revert from the on-disk journal.
//!
//!     cargo run --example patch_workspace -- [function names...]

use std::path::Path;

use funcbench::corpus::{extract_functions, ExtractionConfig};
use funcbench::llm::parse_response;
use funcbench::patch::{apply_patch, prepare_workspace, revert_patch, PatchEntry, PatchSet};
use funcbench::report::compute_delta;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let project = fixtures.join("mock_project");
    let mut names: Vec<String> = std::env::args().skip(1).collect();
    if names.is_empty() {
        names = ["mk_trim", "mk_reverse", "mk_count_char", "mk_vec_sum"].map(String::from).to_vec();
    }
    let corpus =
        extract_functions(&project, &ExtractionConfig { exclude: vec!["tests/**".into()], ..Default::default() })?;
    let mut entries = Vec::new();
    for n in &names {
        let record = corpus.by_name(n).ok_or_else(|| format!("no function named {n}"))?;
        let raw = std::fs::read_to_string(fixtures.join("mock_responses").join(format!("{n}.txt")))?;
        let code = parse_response(&raw).ok_or_else(|| format!("{n}: no code in response"))?;
        println!("{n}: {} changed lines", compute_delta(&record.source_text, &code));
        entries.push(PatchEntry::new(record, code));
    }

    let ws = prepare_workspace(&project)?;
    let set = apply_patch(ws.root(), entries)?;
    let journal = set.save_journal()?;
    println!("applied {} entries to {} files, journal {}", set.entries.len(), set.files.len(), journal.display());
    for f in &set.files {
        let now = std::fs::read(ws.root().join(&f.file_path))?;
        println!("  {}: {} -> {} bytes", f.file_path, std::fs::read(project.join(&f.file_path))?.len(), now.len());
    }

    // A fresh process would only have the journal to go on.
    let mut reloaded = PatchSet::load_journal(ws.root())?;
    revert_patch(&mut reloaded)?;
    for f in &reloaded.files {
        assert_eq!(std::fs::read(ws.root().join(&f.file_path))?, std::fs::read(project.join(&f.file_path))?);
    }
    std::fs::remove_file(journal)?;
    println!("reverted; every touched file matches the original");
    Ok(())
}
