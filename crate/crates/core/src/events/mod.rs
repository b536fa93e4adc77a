//! Normalized developer events and the detectors that turn them into
//! achievement increments.

mod detector;
mod increments;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingestion::CoverageReport;

pub use detector::{step_detectors, DetectorState, FailingTest};
pub use increments::{simple_increments, Increment};

/// Milliseconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WireEvent")]
pub struct DevEvent {
    pub ts: Timestamp,
    #[serde(rename = "session")]
    pub session_id: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl DevEvent {
    pub fn new(ts: Timestamp, session_id: impl Into<String>, kind: EventKind) -> DevEvent {
        DevEvent { ts, session_id: session_id.into(), kind }
    }

    /// Checks the per-variant invariants.
    pub fn validate(&self) -> Result<(), InvalidEvent> {
        match &self.kind {
            EventKind::TestRunFinished(run) => {
                if run.with_coverage && run.coverage.is_none() {
                    return Err(InvalidEvent::MissingCoverage);
                }
                if let Some(cov) = &run.coverage {
                    if !cov.is_consistent() {
                        return Err(InvalidEvent::InconsistentCoverage);
                    }
                }
                for t in &run.tests {
                    if (t.status == TestStatus::Passed) == t.failure_type.is_some() {
                        return Err(InvalidEvent::FailureType(t.key()));
                    }
                }
                Ok(())
            }
            EventKind::SourceChanged(change) if change.change_facts.is_empty() => {
                Err(InvalidEvent::NoChangeFacts(change.path.clone()))
            }
            _ => Ok(()),
        }
    }
}

/// Unknown keys are rejected at every level, as in the published schema.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireEvent {
    ts: Timestamp,
    session: String,
    kind: String,
    payload: serde_json::Value,
}

impl TryFrom<WireEvent> for DevEvent {
    type Error = serde_json::Error;

    fn try_from(w: WireEvent) -> Result<DevEvent, serde_json::Error> {
        let kind = serde_json::from_value(serde_json::json!({"kind": w.kind, "payload": w.payload}))?;
        Ok(DevEvent { ts: w.ts, session_id: w.session, kind })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidEvent {
    #[error("test run has with_coverage=true but no coverage report")]
    MissingCoverage,
    #[error("coverage report counters are inconsistent")]
    InconsistentCoverage,
    #[error("test {0}: failure_type must be present exactly when the test did not pass")]
    FailureType(TestKey),
    #[error("source change of {0} carries no change facts")]
    NoChangeFacts(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    TestRunFinished(TestRun),
    SourceChanged(SourceChange),
    DebugRunStarted {},
    BreakpointSet { kind: BreakpointKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRun {
    pub suite_id: String,
    pub tests: Vec<TestCaseResult>,
    pub with_coverage: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReport>,
}

impl TestRun {
    /// A run with at least one test and no failures.
    pub fn passed(&self) -> bool {
        !self.tests.is_empty() && self.tests.iter().all(|t| t.status == TestStatus::Passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Passed,
    Failed,
    Errored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCaseResult {
    pub class_name: String,
    pub method_name: String,
    pub status: TestStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_type: Option<String>,
}

impl TestCaseResult {
    pub fn passed(class_name: impl Into<String>, method_name: impl Into<String>) -> Self {
        TestCaseResult {
            class_name: class_name.into(),
            method_name: method_name.into(),
            status: TestStatus::Passed,
            failure_type: None,
        }
    }

    pub fn failed(
        class_name: impl Into<String>,
        method_name: impl Into<String>,
        failure_type: impl Into<String>,
    ) -> Self {
        TestCaseResult {
            class_name: class_name.into(),
            method_name: method_name.into(),
            status: TestStatus::Failed,
            failure_type: Some(failure_type.into()),
        }
    }

    pub fn key(&self) -> TestKey {
        TestKey::new(&self.class_name, &self.method_name)
    }
}

/// Identity of a test: `(class_name, method_name)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TestKey {
    pub class_name: String,
    pub method_name: String,
}

impl TestKey {
    pub fn new(class_name: &str, method_name: &str) -> TestKey {
        TestKey { class_name: class_name.to_string(), method_name: method_name.to_string() }
    }
}

impl fmt::Display for TestKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.class_name, self.method_name)
    }
}

impl FromStr for TestKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (class, method) = s.rsplit_once('#').ok_or_else(|| format!("test key `{s}` lacks `#`"))?;
        Ok(TestKey::new(class, method))
    }
}

impl Serialize for TestKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TestKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileClass {
    Test,
    Production,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceChange {
    pub path: String,
    pub file_class: FileClass,
    pub change_facts: Vec<ChangeFact>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefactoringType {
    Rename,
    ExtractMethod,
    InlineMethod,
}

/// A refactoring recognized between two versions of a file.
///
/// `target` is the method the refactoring produced or consumed: the new
/// name of a rename, the new helper of an extraction, the removed helper of
/// an inlining. `source` is the old name of a rename, or the method that
/// lost (extract) or received (inline) the code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refactoring {
    pub rtype: RefactoringType,
    pub target: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fact", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChangeFact {
    TestMethodAdded { class_name: String, method_name: String },
    AssertionAddedToTest { class_name: String, method_name: String },
    PrintStatementAdded { line: String },
    RefactoringDetected(Refactoring),
    GenericEdit {},
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakpointKind {
    Line,
    Method,
    Conditional,
    FieldWatchpoint,
}
