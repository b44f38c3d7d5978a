//! Dissimilarity, chained scoring and static report artifacts.

mod delta;
mod score;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use delta::{aggregate_delta, compute_delta, DeltaReport, DEFAULT_DELTA_THRESHOLD};
pub use score::{fmt_final, fmt_raw, score, ScoreCard, Weights};

use crate::sanitizer::{category_counts, Category, SanitizerAlert};
use crate::suite::{IterationStatus, TestIteration};

/// Everything the report needs about one model.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub scorecard: ScoreCard,
    /// Set when the model's edits fall below the dissimilarity threshold.
    pub excluded: bool,
    pub iterations: Vec<TestIteration>,
    /// Unique alerts.
    pub alerts: Vec<SanitizerAlert>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Input artifact name -> sha256.
    pub inputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub config: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// 1-based; `None` for excluded models.
    pub rank: Option<usize>,
    pub excluded: bool,
    pub scorecard: ScoreCard,
    pub iterations: usize,
    pub na_iterations: usize,
    pub unique_alerts: usize,
    pub alert_counts: BTreeMap<Category, usize>,
}

/// Ranked entries: by final score descending (ties by model id), excluded
/// models last and unranked.
pub fn leaderboard(models: &[ModelReport]) -> Vec<LeaderboardEntry> {
    let mut order: Vec<&ModelReport> = models.iter().collect();
    order.sort_by(|a, b| {
        a.excluded
            .cmp(&b.excluded)
            .then(b.scorecard.final_score.total_cmp(&a.scorecard.final_score))
            .then_with(|| a.scorecard.model_id.cmp(&b.scorecard.model_id))
    });
    let mut rank = 0;
    order
        .into_iter()
        .map(|m| {
            let r = (!m.excluded).then(|| {
                rank += 1;
                rank
            });
            LeaderboardEntry {
                rank: r,
                excluded: m.excluded,
                scorecard: m.scorecard.clone(),
                iterations: m.iterations.len(),
                na_iterations: m.iterations.iter().filter(|i| i.status == IterationStatus::Na).count(),
                unique_alerts: m.alerts.len(),
                alert_counts: category_counts(&m.alerts),
            }
        })
        .collect()
}

pub fn leaderboard_markdown(entries: &[LeaderboardEntry]) -> String {
    let mut s = String::new();
    s.push_str(
        "| Rank | Model | Compilability | Func. Test | Mem. Safety | Delta | Score | N/A iters | Unique alerts |\n",
    );
    s.push_str("|---:|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for e in entries {
        let c = &e.scorecard;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {}/{} | {} |",
            e.rank.map_or("excluded".to_string(), |r| r.to_string()),
            c.model_id,
            fmt_raw(c.s1),
            fmt_raw(c.s2),
            fmt_raw(c.s3),
            fmt_raw(c.delta_bonus),
            fmt_final(c.final_score),
            e.na_iterations,
            e.iterations,
            e.unique_alerts
        );
    }
    s
}

/// File-name-safe form of a model id.
pub fn model_slug(model_id: &str) -> String {
    model_id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' }).collect()
}

pub const NA_COLOR: &str = "#4a0010";

/// Red at 0, yellow at 0.5, green at 1.
pub fn rate_color(rate: f64) -> String {
    let r = rate.clamp(0.0, 1.0);
    let (lo, hi, t) = if r < 0.5 {
        ((215.0, 48.0, 39.0), (254.0, 224.0, 60.0), r * 2.0)
    } else {
        ((254.0, 224.0, 60.0), (26.0, 152.0, 80.0), r * 2.0 - 1.0)
    };
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(lo.0, hi.0), mix(lo.1, hi.1), mix(lo.2, hi.2))
}

/// One square per iteration, in index order, 50 per row.
pub fn heatmap_svg(model_id: &str, iterations: &[TestIteration]) -> String {
    const COLS: usize = 50;
    const CELL: usize = 12;
    let mut its: Vec<&TestIteration> = iterations.iter().collect();
    its.sort_by_key(|i| i.iteration_index);
    let rows = its.len().div_ceil(COLS).max(1);
    let (w, h) = (COLS * CELL + 20, rows * CELL + 50);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(
        s,
        r#"<text x="10" y="18" font-family="sans-serif" font-size="13">{} test pass rate per iteration ({} iterations)</text>"#,
        xml_escape(model_id),
        its.len()
    );
    for (n, it) in its.iter().enumerate() {
        let (x, y) = (10 + (n % COLS) * CELL, 28 + (n / COLS) * CELL);
        let (class, fill, label) = match it.pass_rate {
            Some(r) => ("cell", rate_color(r), format!("{:.1}%", r * 100.0)),
            None => {
                ("cell na", NA_COLOR.to_string(), format!("N/A ({})", it.na_reason.as_deref().unwrap_or("no result")))
            }
        };
        let _ = writeln!(
            s,
            r#"<rect class="{class}" x="{x}" y="{y}" width="{c}" height="{c}" fill="{fill}"><title>iteration {}: {}</title></rect>"#,
            it.iteration_index,
            xml_escape(&label),
            c = CELL - 1
        );
    }
    let ly = 28 + rows * CELL + 14;
    let _ = writeln!(
        s,
        r#"<text x="10" y="{ly}" font-family="sans-serif" font-size="11">0% <tspan style="fill:{}">&#9632;</tspan> 50% <tspan style="fill:{}">&#9632;</tspan> 100% <tspan style="fill:{}">&#9632;</tspan>  N/A <tspan style="fill:{NA_COLOR}">&#9632;</tspan></text>"#,
        rate_color(0.0),
        rate_color(0.5),
        rate_color(1.0)
    );
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub leaderboard_md: PathBuf,
    pub leaderboard_json: PathBuf,
    pub heatmaps: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// Write leaderboard.md/.json, one heatmap per model, and run-manifest.json.
pub fn emit_report(out_dir: &Path, models: &[ModelReport], manifest: &RunManifest) -> std::io::Result<ReportFiles> {
    if models.is_empty() {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, "no score cards to report"));
    }
    std::fs::create_dir_all(out_dir)?;
    let entries = leaderboard(models);
    let leaderboard_md = out_dir.join("leaderboard.md");
    std::fs::write(&leaderboard_md, leaderboard_markdown(&entries))?;
    let leaderboard_json = out_dir.join("leaderboard.json");
    std::fs::write(&leaderboard_json, serde_json::to_vec_pretty(&entries).map_err(std::io::Error::other)?)?;
    let mut heatmaps = Vec::new();
    for m in models {
        let p = out_dir.join(format!("heatmap.{}.svg", model_slug(&m.scorecard.model_id)));
        std::fs::write(&p, heatmap_svg(&m.scorecard.model_id, &m.iterations))?;
        heatmaps.push(p);
    }
    let manifest_path = out_dir.join("run-manifest.json");
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(manifest).map_err(std::io::Error::other)?)?;
    Ok(ReportFiles { leaderboard_md, leaderboard_json, heatmaps, manifest: manifest_path })
}
