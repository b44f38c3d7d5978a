//! Extract the benchmark task pool from a C tree and save it.
//!
//!     cargo run --example extract_corpus -- [project_dir] [out_dir]

use std::path::PathBuf;

use funcbench::corpus::{count_tokens, extract_functions, load_corpus, save_corpus, ExtractionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mock_project"));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("funcbench-corpus"));

    let config = ExtractionConfig { exclude: vec!["tests/**".into()], ..Default::default() };
    let snap = extract_functions(&root, &config)?;
    println!(
        "{}: {} functions kept of {} found ({} below, {} above the token bounds)",
        snap.project_name,
        snap.records.len(),
        snap.stats.functions_found,
        snap.stats.below_min,
        snap.stats.above_max
    );
    for r in &snap.records {
        println!(
            "  {}  {:<22} {}:{}-{}  {} tokens",
            r.id, r.name, r.file_path, r.start_line, r.end_line, r.token_count
        );
    }
    println!("`int f(void){{return 0;}}` has {} tokens", count_tokens("int f(void){return 0;}"));

    let store = save_corpus(&snap, &out)?;
    let back = load_corpus(&store)?;
    assert_eq!(back, snap);
    println!("saved to {}", store.dir.display());
    Ok(())
}
