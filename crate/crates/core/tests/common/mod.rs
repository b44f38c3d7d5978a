//! Fixture helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use funcbench::sanitizer::{parse_sanitizer_logs, AlertSource, ParseOptions, RunRef, SanitizerAlert};
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Debug, Deserialize)]
pub struct GoldenLabels {
    pub log: Vec<GoldenLog>,
}

#[derive(Debug, Deserialize)]
pub struct GoldenLog {
    pub file: String,
    #[serde(default)]
    pub alerts: Vec<GoldenAlert>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GoldenAlert {
    pub tool: String,
    pub kind: String,
    pub category: String,
    pub top_frames: Vec<String>,
    #[serde(default)]
    pub truncated: bool,
}

pub fn golden_labels() -> GoldenLabels {
    let text = std::fs::read_to_string(fixtures().join("golden_logs/labels.toml")).unwrap();
    toml::from_str(&text).unwrap()
}

pub fn parse_golden(file: &str) -> Vec<SanitizerAlert> {
    let log = std::fs::read_to_string(fixtures().join("golden_logs").join(file)).unwrap();
    parse_sanitizer_logs(&log, &RunRef::new(AlertSource::Test, 0, file), &ParseOptions::default())
}

pub fn as_label(a: &SanitizerAlert) -> GoldenAlert {
    let s = |v: serde_json::Value| v.as_str().unwrap().to_string();
    GoldenAlert {
        tool: s(serde_json::to_value(a.tool).unwrap()),
        kind: a.kind.clone(),
        category: s(serde_json::to_value(a.category).unwrap()),
        top_frames: a.top_frames.clone(),
        truncated: a.truncated,
    }
}

/// `(file, expected, got)` for every log whose parse differs from its label.
pub fn golden_mismatches() -> Vec<(String, Vec<GoldenAlert>, Vec<GoldenAlert>)> {
    golden_labels()
        .log
        .into_iter()
        .filter_map(|l| {
            let got: Vec<GoldenAlert> = parse_golden(&l.file).iter().map(as_label).collect();
            (got != l.alerts).then_some((l.file, l.alerts, got))
        })
        .collect()
}
