//! Per-project build/test adapter files.

use std::path::Path;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, CommandOutput};

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("cannot read adapter {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid adapter: {0}")]
    Invalid(String),
}

/// How to turn a test-suite log into (passed, total).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TestParser {
    /// One regex with named groups `passed` and `total`; the last match wins.
    Summary { name: String, pattern: String },
    /// Count lines matching `pass_pattern` and `fail_pattern`.
    Results { name: String, pass_pattern: String, fail_pattern: String },
}

impl TestParser {
    pub fn name(&self) -> &str {
        match self {
            TestParser::Summary { name, .. } | TestParser::Results { name, .. } => name,
        }
    }

    fn validate(&self) -> Result<(), AdapterError> {
        let bad = |e: regex::Error| AdapterError::Invalid(format!("test parser `{}`: {e}", self.name()));
        match self {
            TestParser::Summary { pattern, .. } => {
                let re = Regex::new(pattern).map_err(bad)?;
                let names: Vec<_> = re.capture_names().flatten().collect();
                if !names.contains(&"passed") || !names.contains(&"total") {
                    return Err(AdapterError::Invalid(format!(
                        "test parser `{}` needs named groups `passed` and `total`",
                        self.name()
                    )));
                }
            }
            TestParser::Results { pass_pattern, fail_pattern, .. } => {
                Regex::new(pass_pattern).map_err(bad)?;
                Regex::new(fail_pattern).map_err(bad)?;
            }
        }
        Ok(())
    }

    /// `(passed, total)`, or `None` when the log carries no usable result.
    pub fn parse(&self, log: &str) -> Option<(u64, u64)> {
        match self {
            TestParser::Summary { pattern, .. } => {
                let re = Regex::new(pattern).ok()?;
                let caps = re.captures_iter(log).last()?;
                let passed = caps.name("passed")?.as_str().parse().ok()?;
                let total: u64 = caps.name("total")?.as_str().parse().ok()?;
                (total > 0 && passed <= total).then_some((passed, total))
            }
            TestParser::Results { pass_pattern, fail_pattern, .. } => {
                let pass = Regex::new(&format!("(?m){pass_pattern}")).ok()?;
                let fail = Regex::new(&format!("(?m){fail_pattern}")).ok()?;
                let p = pass.find_iter(log).count() as u64;
                let f = fail.find_iter(log).count() as u64;
                (p + f > 0).then_some((p, p + f))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineExpectations {
    #[serde(default)]
    pub total_tests: Option<u64>,
    #[serde(default)]
    pub pass_rate: Option<f64>,
}

fn d_build_timeout() -> u64 {
    1800
}
fn d_test_timeout() -> u64 {
    3600
}
fn d_full_rebuild() -> usize {
    500
}
fn d_log_limit() -> usize {
    1 << 20
}
fn d_probe() -> String {
    "\n#error funcbench unrelated-function probe\n".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectAdapter {
    pub name: String,
    #[serde(default)]
    pub configure_cmd: Option<String>,
    pub build_cmd: String,
    /// Used by the periodic full-rebuild check.
    #[serde(default)]
    pub clean_cmd: Option<String>,
    pub test_cmd: String,
    /// Commands whose first output line is recorded as a toolchain version.
    #[serde(default)]
    pub toolchain_cmds: Vec<String>,
    /// `KEY=VALUE` pairs applied to every build and test command.
    #[serde(default)]
    pub sanitizer_env: Vec<String>,
    pub test_parser: TestParser,
    #[serde(default)]
    pub baseline: BaselineExpectations,
    #[serde(default = "d_build_timeout")]
    pub build_timeout_secs: u64,
    #[serde(default = "d_test_timeout")]
    pub test_timeout_secs: u64,
    #[serde(default = "d_full_rebuild")]
    pub full_rebuild_every: usize,
    #[serde(default = "d_log_limit")]
    pub log_limit_bytes: usize,
    /// Text substituted for a function to test whether it is compiled at all.
    #[serde(default = "d_probe")]
    pub probe_text: String,
    /// Extra suite runs for an iteration that produced no parseable result.
    #[serde(default)]
    pub suite_retries: u32,
}

impl ProjectAdapter {
    pub fn load(path: &Path) -> Result<Self, AdapterError> {
        let read_err = |reason: String| AdapterError::Read { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let adapter: ProjectAdapter = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| read_err(e.to_string()))?
        };
        adapter.validate()?;
        Ok(adapter)
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        if self.build_cmd.trim().is_empty() || self.test_cmd.trim().is_empty() {
            return Err(AdapterError::Invalid("build_cmd and test_cmd must be set".into()));
        }
        self.env().map_err(AdapterError::Invalid)?;
        self.test_parser.validate()?;
        if self.full_rebuild_every == 0 {
            return Err(AdapterError::Invalid("full_rebuild_every must be positive".into()));
        }
        Ok(())
    }

    pub fn env(&self) -> Result<Vec<(String, String)>, String> {
        exec::parse_env_pairs(&self.sanitizer_env)
    }

    fn run(&self, cmd: &str, dir: &Path, timeout_secs: u64) -> std::io::Result<CommandOutput> {
        let env = self.env().map_err(std::io::Error::other)?;
        exec::run_shell(cmd, dir, &env, Some(Duration::from_secs(timeout_secs)))
    }

    pub fn configure(&self, dir: &Path) -> std::io::Result<Option<CommandOutput>> {
        match self.configure_cmd.as_deref().filter(|c| !c.trim().is_empty()) {
            Some(cmd) => self.run(cmd, dir, self.build_timeout_secs).map(Some),
            None => Ok(None),
        }
    }

    pub fn build(&self, dir: &Path) -> std::io::Result<CommandOutput> {
        self.run(&self.build_cmd, dir, self.build_timeout_secs)
    }

    /// Clean then build. Without a clean command this is a plain build.
    pub fn full_build(&self, dir: &Path) -> std::io::Result<CommandOutput> {
        if let Some(clean) = self.clean_cmd.as_deref().filter(|c| !c.trim().is_empty()) {
            let out = self.run(clean, dir, self.build_timeout_secs)?;
            if !out.success() {
                return Ok(out);
            }
        }
        self.build(dir)
    }

    pub fn test(&self, dir: &Path) -> std::io::Result<CommandOutput> {
        self.run(&self.test_cmd, dir, self.test_timeout_secs)
    }

    /// `(command, first output line)` for each toolchain command.
    pub fn toolchain_versions(&self, dir: &Path) -> Vec<(String, String)> {
        self.toolchain_cmds
            .iter()
            .map(|cmd| {
                let line = exec::run_shell(cmd, dir, &[], Some(Duration::from_secs(60)))
                    .ok()
                    .and_then(|o| o.log.lines().next().map(str::to_string))
                    .unwrap_or_else(|| "unavailable".to_string());
                (cmd.clone(), line)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
name = "demo"
build_cmd = "make"
test_cmd = "make test"
sanitizer_env = ["ASAN_OPTIONS=halt_on_error=0:detect_leaks=1"]
[test_parser]
mode = "summary"
name = "demo-summary"
pattern = 'passed (?P<passed>\d+)/(?P<total>\d+)'
"#;

    #[test]
    fn defaults_fill_in() {
        let a: ProjectAdapter = toml::from_str(MIN).unwrap();
        a.validate().unwrap();
        assert_eq!(a.build_timeout_secs, 1800);
        assert_eq!(a.full_rebuild_every, 500);
        assert_eq!(a.log_limit_bytes, 1 << 20);
        assert_eq!(a.env().unwrap()[0].1, "halt_on_error=0:detect_leaks=1");
    }

    #[test]
    fn summary_parser_takes_last_match() {
        let a: ProjectAdapter = toml::from_str(MIN).unwrap();
        assert_eq!(a.test_parser.parse("passed 1/2\n...\npassed 19/20\n"), Some((19, 20)));
        assert_eq!(a.test_parser.parse("segfault"), None);
    }

    #[test]
    fn results_parser_counts_lines() {
        let p = TestParser::Results { name: "r".into(), pass_pattern: "^PASS ".into(), fail_pattern: "^FAIL ".into() };
        assert_eq!(p.parse("PASS a\nFAIL b\nPASS c\nnoise PASS d\n"), Some((2, 3)));
        assert_eq!(p.parse(""), None);
    }

    #[test]
    fn summary_parser_requires_named_groups() {
        let mut a: ProjectAdapter = toml::from_str(MIN).unwrap();
        a.test_parser = TestParser::Summary { name: "x".into(), pattern: r"(\d+)/(\d+)".into() };
        assert!(a.validate().is_err());
    }
}
