//! Drive the bundled stand-in fuzzer over a few unpatched iterations and
//! tabulate unique alerts per category.
//!
//!     cargo run --example fuzz_campaign -- [iterations]

use std::collections::HashMap;
use std::path::Path;

use funcbench::adapter::ProjectAdapter;
use funcbench::compile::PoolConfig;
use funcbench::sanitizer::fuzz::{run_fuzz_campaign, FuzzSettings, FuzzerAdapter};
use funcbench::suite::{IterationStatus, TestIteration};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let n: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(4);
    let adapter = ProjectAdapter::load(&fixtures.join("mock_adapter.toml"))?;
    let fuzzer = FuzzerAdapter::load(&fixtures.join("mock_fuzzer.toml"))?;

    // Empty batches: the campaign fuzzes the original project.
    let iterations: Vec<TestIteration> = (0..n)
        .map(|i| TestIteration {
            iteration_index: i,
            seed: i,
            sampled_ids: vec![],
            pass_rate: Some(1.0),
            status: IterationStatus::Ok,
            na_reason: None,
            alerts: vec![],
            duration_ms: 0,
        })
        .collect();
    let settings = FuzzSettings { max_iterations: n as usize, budget: 1000 };
    let campaign = run_fuzz_campaign(
        "baseline",
        &adapter,
        &fuzzer,
        &fixtures.join("mock_project"),
        &iterations,
        &HashMap::new(),
        &settings,
        &PoolConfig { jobs: 2, work_dir: None },
    )?;
    println!("{} iterations fuzzed, {} skipped", campaign.iterations_used, campaign.skipped.len());
    for (cat, count) in &campaign.counts {
        println!("  {:<10} {count}", cat.as_str());
    }
    println!("  {:<10} {}", "total", campaign.total);
    for a in &campaign.alerts {
        println!(
            "  [{}] {} at {} (iteration {})",
            a.category.as_str(),
            a.kind,
            a.top_frames.join(" < "),
            a.first_seen.seq
        );
    }
    Ok(())
}
