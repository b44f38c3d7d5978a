//! Chain raw scores into final scores for a few made-up models and write the
//! static report bundle (leaderboard, heatmaps, manifest).
//!
//!     cargo run --example score_report -- [out_dir]

use std::path::PathBuf;

use funcbench::report::{emit_report, fmt_final, fmt_raw, score, ModelReport, RunManifest, Weights};
use funcbench::suite::{compute_s2, IterationStatus, NaPolicy, TestIteration};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn iterations(seed: u64, mean: f64, na_every: u64) -> Vec<TestIteration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..200)
        .map(|i| {
            let na = na_every > 0 && i % na_every == 0;
            let rate = (!na).then(|| (mean + rng.random_range(-0.15..0.15f64)).clamp(0.0, 1.0));
            TestIteration {
                iteration_index: i,
                seed: i,
                sampled_ids: vec![],
                pass_rate: rate,
                status: if na { IterationStatus::Na } else { IterationStatus::Ok },
                na_reason: na.then(|| "build-failure".to_string()),
                alerts: vec![],
                duration_ms: 0,
            }
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("funcbench-report"));
    // (model, s1, mean pass rate, N/A period, s3, mean changed lines)
    let models = [
        ("vendor/large", 93.0, 0.92, 40, 88.0, 27.0),
        ("vendor/small", 80.0, 0.75, 9, 52.0, 19.5),
        ("local/coder-7b", 64.0, 0.55, 4, 21.0, 14.0),
        ("local/echo", 100.0, 1.0, 0, 100.0, 0.2),
    ];
    let mut reports = Vec::new();
    for (i, (id, s1, mean, na_every, s3, d_raw)) in models.into_iter().enumerate() {
        let its = iterations(i as u64, mean, na_every);
        let s2 = compute_s2(&its, NaPolicy::Zero);
        let card = score(s1, s2, s3, d_raw, Weights::default()).with_model(id);
        println!(
            "{id:<16} c1 {} c2 {} c3 {} bonus {} -> {}",
            fmt_raw(card.c1),
            fmt_raw(card.c2),
            fmt_raw(card.c3),
            fmt_raw(card.delta_bonus),
            fmt_final(card.final_score)
        );
        reports.push(ModelReport { scorecard: card, excluded: d_raw < 1.0, iterations: its, alerts: vec![] });
    }
    let files = emit_report(
        &out,
        &reports,
        &RunManifest { tool_version: env!("CARGO_PKG_VERSION").into(), ..Default::default() },
    )?;
    println!("\n{}", std::fs::read_to_string(&files.leaderboard_md)?);
    for h in &files.heatmaps {
        println!("heatmap {}", h.display());
    }
    Ok(())
}
