//! Sanitizer report parsing, categorization, deduplication and the memory
//! safety score.

pub mod fuzz;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use parse::{parse_sanitizer_logs, ParseOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SanitizerTool {
    Asan,
    Ubsan,
    Lsan,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "SEGV")]
    Segv,
    Spatial,
    Temporal,
    Undefined,
    Leak,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Segv, Category::Spatial, Category::Temporal, Category::Undefined, Category::Leak];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Segv => "SEGV",
            Category::Spatial => "Spatial",
            Category::Temporal => "Temporal",
            Category::Undefined => "Undefined",
            Category::Leak => "Leak",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which stage's logs an alert was harvested from. Ordered by pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlertSource {
    Compile,
    Test,
    Fuzz,
}

/// Where an alert was seen: stage, a sequence number within the stage (task
/// or iteration index), and a label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunRef {
    pub source: AlertSource,
    pub seq: u64,
    pub label: String,
}

impl RunRef {
    pub fn new(source: AlertSource, seq: u64, label: impl Into<String>) -> Self {
        RunRef { source, seq, label: label.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizerAlert {
    pub tool: SanitizerTool,
    /// Report headline kind, e.g. `heap-buffer-overflow`.
    pub kind: String,
    pub category: Category,
    /// Leading symbolized frames, sanitizer runtime frames removed.
    pub top_frames: Vec<String>,
    pub dedup_key: String,
    pub source: AlertSource,
    pub first_seen: RunRef,
    /// `file:line` of the first frame when the log carries one.
    #[serde(default)]
    pub location: Option<String>,
    /// The report block ended before its summary line.
    #[serde(default)]
    pub truncated: bool,
}

impl SanitizerAlert {
    pub fn new(tool: SanitizerTool, kind: impl Into<String>, top_frames: Vec<String>, first_seen: RunRef) -> Self {
        let kind = kind.into();
        let category = categorize_alert(&kind, tool);
        SanitizerAlert {
            dedup_key: dedup_key(category, &kind, &top_frames),
            tool,
            category,
            top_frames,
            source: first_seen.source,
            first_seen,
            kind,
            location: None,
            truncated: false,
        }
    }
}

pub fn dedup_key(category: Category, kind: &str, top_frames: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(category.as_str().as_bytes());
    h.update([0]);
    h.update(kind.as_bytes());
    for f in top_frames {
        h.update([0]);
        h.update(f.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

const SPATIAL: &[&str] = &[
    "heap-buffer-overflow",
    "stack-buffer-overflow",
    "global-buffer-overflow",
    "stack-buffer-underflow",
    "dynamic-stack-buffer-overflow",
    "container-overflow",
    "intra-object-overflow",
    "memcpy-param-overlap",
    "strcpy-param-overlap",
    "strncpy-param-overlap",
    "strcat-param-overlap",
    "negative-size-param",
    "out-of-bounds",
    "index-out-of-bounds",
    "wild-addr-read",
    "wild-addr-write",
    "unknown-crash",
];

const TEMPORAL: &[&str] = &[
    "heap-use-after-free",
    "use-after-free",
    "stack-use-after-return",
    "stack-use-after-scope",
    "use-after-return",
    "use-after-scope",
    "use-after-poison",
    "double-free",
    "invalid-free",
    "bad-free",
    "alloc-dealloc-mismatch",
    "new-delete-type-mismatch",
];

const SEGV: &[&str] = &["SEGV", "segv", "segmentation-fault", "BUS", "stack-overflow"];

/// Map a report kind onto the fixed five-way taxonomy. Unknown kinds fall
/// back to `Undefined`.
pub fn categorize_alert(kind: &str, tool: SanitizerTool) -> Category {
    match tool {
        SanitizerTool::Lsan => return Category::Leak,
        SanitizerTool::Ubsan => return Category::Undefined,
        _ => {}
    }
    if kind.contains("leak") {
        return Category::Leak;
    }
    if SEGV.contains(&kind) || kind.to_ascii_lowercase().contains("segmentation") {
        return Category::Segv;
    }
    if SPATIAL.contains(&kind) || kind.ends_with("-buffer-overflow") || kind.contains("out-of-bounds") {
        return Category::Spatial;
    }
    if TEMPORAL.contains(&kind) || kind.contains("use-after") {
        return Category::Temporal;
    }
    if kind == "FPE" || kind == "ILL" {
        return Category::Undefined;
    }
    log::warn!("unknown sanitizer kind `{kind}` ({tool:?}); counting as Undefined");
    Category::Undefined
}

/// One alert per dedup key, keeping the earliest sighting, sorted by key.
pub fn dedupe_alerts<I>(alerts: I) -> Vec<SanitizerAlert>
where
    I: IntoIterator<Item = SanitizerAlert>,
{
    let mut unique: BTreeMap<String, SanitizerAlert> = BTreeMap::new();
    for a in alerts {
        match unique.get_mut(&a.dedup_key) {
            Some(existing) => {
                if (&a.first_seen, &a.location, a.truncated)
                    < (&existing.first_seen, &existing.location, existing.truncated)
                {
                    *existing = a;
                }
            }
            None => {
                unique.insert(a.dedup_key.clone(), a);
            }
        }
    }
    unique.into_values().collect()
}

pub const DEFAULT_LEAK_FACTOR: f64 = 0.5;

/// `100 - penalty * (non_leak + leak_factor * leak)`, floored at zero.
pub fn compute_s3(unique: &[SanitizerAlert], penalty_per_alert: f64, leak_factor: f64) -> f64 {
    assert!(penalty_per_alert > 0.0, "penalty_per_alert must be positive");
    let leaks = unique.iter().filter(|a| a.category == Category::Leak).count() as f64;
    let others = unique.len() as f64 - leaks;
    let deducted = penalty_per_alert * (others + leak_factor * leaks);
    (100.0 - deducted).max(0.0)
}

/// Unique-alert counts per category.
pub fn category_counts(unique: &[SanitizerAlert]) -> BTreeMap<Category, usize> {
    let mut counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for a in unique {
        *counts.entry(a.category).or_default() += 1;
    }
    counts
}
