//! External artifacts in, developer events out: JUnit/JaCoCo/LCOV parsers,
//! source-change classification and the project watcher.

mod classify;
mod coverage;
mod jacoco;
pub mod java;
mod junit;
mod lcov;
mod refactor;
mod watch;
mod xml;

use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

pub use classify::{classify_change, classify_file, content_hash, FileSnapshot};
pub use coverage::{ClassCoverage, CoverageReport, CoverageTotals};
pub use jacoco::parse_jacoco_xml;
pub use junit::{parse_junit_xml, TestRunReport};
pub use lcov::{parse_lcov, LcovMode};
pub use refactor::{detect_in, detect_refactorings};
pub use watch::{watch, WatchError, WatchHandle, WatchItem};

use crate::events::{EventKind, TestRun, Timestamp};

/// A report that could not be parsed. The file is skipped with a warning.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed {format} report: {reason}")]
pub struct MalformedReport {
    pub format: &'static str,
    pub reason: String,
}

impl MalformedReport {
    pub fn new(format: &'static str, reason: impl Into<String>) -> MalformedReport {
        MalformedReport { format, reason: reason.into() }
    }

    pub(crate) fn in_format(mut self, format: &'static str) -> MalformedReport {
        self.format = format;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportGlobs {
    pub junit_glob: Vec<String>,
    pub coverage_glob: Vec<String>,
}

impl Default for ReportGlobs {
    fn default() -> Self {
        ReportGlobs {
            junit_glob: vec!["**/TEST-*.xml".into()],
            coverage_glob: vec!["**/jacoco*.xml".into(), "**/*.lcov".into(), "**/lcov.info".into()],
        }
    }
}

/// Ingestion settings (`reports.*`, `test_roots`, `print_pattern`,
/// `debounce_ms`, `coverage_pair_window_ms`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub reports: ReportGlobs,
    pub test_roots: Vec<String>,
    pub source_extensions: Vec<String>,
    pub print_pattern: String,
    pub debounce_ms: u64,
    pub coverage_pair_window_ms: u64,
    /// Directory names never descended into.
    pub ignore_dirs: Vec<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            reports: ReportGlobs::default(),
            test_roots: vec!["**/src/test/**".into()],
            source_extensions: vec!["java".into()],
            print_pattern: "System.out.println".into(),
            debounce_ms: 200,
            coverage_pair_window_ms: 5_000,
            ignore_dirs: vec![".git".into(), "target".into(), "node_modules".into()],
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid glob `{glob}`: {source}")]
pub struct GlobError {
    glob: String,
    source: globset::Error,
}

pub(crate) fn glob_set(patterns: &[String]) -> Result<GlobSet, GlobError> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        b.add(Glob::new(p).map_err(|source| GlobError { glob: p.clone(), source })?);
    }
    b.build().map_err(|source| GlobError { glob: patterns.join(","), source })
}

/// Compiled matchers for an [`IngestConfig`].
#[derive(Debug, Clone)]
pub struct Matchers {
    pub junit: GlobSet,
    pub coverage: GlobSet,
    pub test_roots: GlobSet,
}

impl Matchers {
    pub fn new(config: &IngestConfig) -> Result<Matchers, GlobError> {
        Ok(Matchers {
            junit: glob_set(&config.reports.junit_glob)?,
            coverage: glob_set(&config.reports.coverage_glob)?,
            test_roots: glob_set(&config.test_roots)?,
        })
    }
}

/// What a file on disk is, as far as ingestion cares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    JunitReport,
    CoverageReport,
    Source,
    Other,
}

pub fn artifact_kind(rel_path: &str, config: &IngestConfig, m: &Matchers) -> ArtifactKind {
    let p = Path::new(rel_path);
    if m.junit.is_match(p) {
        ArtifactKind::JunitReport
    } else if m.coverage.is_match(p) {
        ArtifactKind::CoverageReport
    } else if p.extension().and_then(|e| e.to_str()).is_some_and(|e| config.source_extensions.iter().any(|s| s == e)) {
        ArtifactKind::Source
    } else {
        ArtifactKind::Other
    }
}

/// Parses a coverage file by extension: `.xml` as JaCoCo, anything else as
/// LCOV.
pub fn parse_coverage_file(path: &Path, bytes: &[u8], mode: LcovMode) -> Result<CoverageReport, MalformedReport> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
        parse_jacoco_xml(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| MalformedReport::new("lcov", "not UTF-8"))?;
        parse_lcov(text, mode)
    }
}

/// Builds the `TestRunFinished` payload for a JUnit report, optionally
/// paired with a coverage report.
pub fn test_run_event(report: Option<TestRunReport>, coverage: Option<CoverageReport>) -> EventKind {
    let (suite_id, tests) = match report {
        Some(r) => (r.suite_id, r.cases),
        None => ("coverage".to_string(), Vec::new()),
    };
    EventKind::TestRunFinished(TestRun { suite_id, tests, with_coverage: coverage.is_some(), coverage })
}

pub(crate) fn mtime_ms(meta: &std::fs::Metadata) -> Option<Timestamp> {
    let t = meta.modified().ok()?;
    let d = t.duration_since(std::time::UNIX_EPOCH).ok()?;
    Some(d.as_millis() as Timestamp)
}
