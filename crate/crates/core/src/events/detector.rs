use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ChangeFact, DevEvent, EventKind, FileClass, Increment, RefactoringType, SourceChange, TestKey, TestRun, TestStatus,
    Timestamp,
};
use crate::catalog::AchievementId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailingTest {
    pub since_ts: Timestamp,
    pub test_edited_since: bool,
    pub production_edited_since: bool,
}

/// State of the compound-sequence detectors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorState {
    /// Tests that failed in the latest run that executed them.
    pub failing_tests: BTreeMap<TestKey, FailingTest>,
    pub last_run_passed: bool,
    pub refactoring_seen_since_last_pass: bool,
    /// Outcome of each test's latest execution (`true` = passed).
    pub last_outcome: BTreeMap<TestKey, bool>,
}

impl DetectorState {
    /// Advances the detectors by one event and returns increments for the
    /// compound achievements (bug-finder, test-fixer, shine-in-new-splendor,
    /// double-check).
    pub fn step(&mut self, event: &DevEvent) -> Vec<Increment> {
        let mut out = Vec::new();
        match &event.kind {
            EventKind::TestRunFinished(run) => self.on_run(event.ts, run, &mut out),
            EventKind::SourceChanged(change) => self.on_change(change, &mut out),
            EventKind::DebugRunStarted {} | EventKind::BreakpointSet { .. } => {}
        }
        out
    }

    fn on_run(&mut self, ts: Timestamp, run: &TestRun, out: &mut Vec<Increment>) {
        let mut bug_finder = 0;
        let mut test_fixer = 0;
        for result in &run.tests {
            let key = result.key();
            let passed = result.status == TestStatus::Passed;
            self.last_outcome.insert(key.clone(), passed);
            if passed {
                if let Some(f) = self.failing_tests.remove(&key) {
                    match (f.test_edited_since, f.production_edited_since) {
                        (true, false) => test_fixer += 1,
                        (false, true) => bug_finder += 1,
                        _ => {}
                    }
                }
            } else {
                self.failing_tests.entry(key).or_insert(FailingTest {
                    since_ts: ts,
                    test_edited_since: false,
                    production_edited_since: false,
                });
            }
        }
        push(out, AchievementId::BugFinder, bug_finder);
        push(out, AchievementId::TestFixer, test_fixer);

        // Coverage-only runs carry no verdict and leave the pass/refactor pairing alone.
        if run.tests.is_empty() {
            return;
        }
        let passed = run.passed();
        if passed && self.last_run_passed && self.refactoring_seen_since_last_pass {
            push(out, AchievementId::ShineInNewSplendor, 1);
        }
        self.last_run_passed = passed;
        self.refactoring_seen_since_last_pass = false;
    }

    fn on_change(&mut self, change: &SourceChange, out: &mut Vec<Increment>) {
        for f in self.failing_tests.values_mut() {
            match change.file_class {
                FileClass::Test => f.test_edited_since = true,
                FileClass::Production => f.production_edited_since = true,
            }
        }

        let stem = Path::new(&change.path).file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let mut double_check = 0;
        for fact in &change.change_facts {
            match fact {
                ChangeFact::RefactoringDetected(r) => {
                    if self.last_run_passed {
                        self.refactoring_seen_since_last_pass = true;
                    }
                    if r.rtype == RefactoringType::Rename && change.file_class == FileClass::Test {
                        let lost = |k: &TestKey| k.method_name == r.source && simple_name(&k.class_name) == stem;
                        self.failing_tests.retain(|k, _| !lost(k));
                        self.last_outcome.retain(|k, _| !lost(k));
                    }
                }
                ChangeFact::AssertionAddedToTest { class_name, method_name } => {
                    let key = TestKey::new(class_name, method_name);
                    if self.last_outcome.get(&key) == Some(&true) {
                        double_check += 1;
                    }
                }
                _ => {}
            }
        }
        push(out, AchievementId::DoubleCheck, double_check);
    }
}

fn simple_name(class_name: &str) -> &str {
    class_name.rsplit(['.', '$']).next().unwrap_or(class_name)
}

fn push(out: &mut Vec<Increment>, achievement: AchievementId, amount: u64) {
    if amount > 0 {
        out.push(Increment::Count { achievement, amount });
    }
}

/// Pure form of [`DetectorState::step`].
pub fn step_detectors(state: &DetectorState, event: &DevEvent) -> (DetectorState, Vec<Increment>) {
    let mut next = state.clone();
    let increments = next.step(event);
    (next, increments)
}
