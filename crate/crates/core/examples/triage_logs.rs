//! Parse a directory of sanitizer logs, deduplicate, and price the result.
//!
//!     cargo run --example triage_logs -- [log_dir] [penalty]

use std::path::PathBuf;

use funcbench::sanitizer::{
    category_counts, compute_s3, dedupe_alerts, parse_sanitizer_logs, AlertSource, ParseOptions, RunRef,
    DEFAULT_LEAK_FACTOR,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden_logs"));
    let penalty: f64 = args.next().map(|p| p.parse()).transpose()?.unwrap_or(0.69);

    let mut logs: Vec<PathBuf> = std::fs::read_dir(&dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    logs.retain(|p| p.extension().is_some_and(|e| e == "log"));
    logs.sort();

    let mut all = Vec::new();
    for (i, p) in logs.iter().enumerate() {
        let text = std::fs::read_to_string(p)?;
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        let alerts =
            parse_sanitizer_logs(&text, &RunRef::new(AlertSource::Test, i as u64, &name), &ParseOptions::default());
        for a in &alerts {
            println!(
                "{name:<32} {:<5} {:<26} {:<9} {}{}",
                format!("{:?}", a.tool).to_lowercase(),
                a.kind,
                a.category.as_str(),
                a.top_frames.join(" < "),
                if a.truncated { "  (truncated)" } else { "" }
            );
        }
        all.extend(alerts);
    }
    let unique = dedupe_alerts(all.clone());
    println!("\n{} reports, {} unique", all.len(), unique.len());
    for (cat, n) in category_counts(&unique) {
        println!("  {:<10} {n}", cat.as_str());
    }
    println!("s3 at {penalty} per alert: {:.2}", compute_s3(&unique, penalty, DEFAULT_LEAK_FACTOR));
    Ok(())
}
