use serde::{Deserialize, Serialize};

use super::{BreakpointKind, ChangeFact, DevEvent, EventKind, FileClass, RefactoringType};
use crate::catalog::{lookup, AchievementId, Boundaries};

/// Failure types counted by Assert and Tested. JUnit 5's
/// `AssertionFailedError` subclasses `java.lang.AssertionError`.
const ASSERTION_FAILURES: [&str; 2] = ["AssertionError", "AssertionFailedError"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Increment {
    Count {
        achievement: AchievementId,
        amount: u64,
    },
    /// Per-level counter increments of a multi-parameter achievement.
    Tiers {
        achievement: AchievementId,
        tiers: [u64; 4],
    },
}

impl Increment {
    pub fn achievement(&self) -> AchievementId {
        match self {
            Increment::Count { achievement, .. } | Increment::Tiers { achievement, .. } => *achievement,
        }
    }

    pub fn total(&self) -> u64 {
        match self {
            Increment::Count { amount, .. } => *amount,
            Increment::Tiers { tiers, .. } => tiers.iter().sum(),
        }
    }
}

/// Increments of the achievements that count single events. Zero
/// increments are omitted.
pub fn simple_increments(event: &DevEvent) -> Vec<Increment> {
    let mut out = Vec::new();
    let mut add = |achievement, amount: u64| {
        if amount > 0 {
            out.push(Increment::Count { achievement, amount });
        }
    };
    use AchievementId as A;
    match &event.kind {
        EventKind::TestRunFinished(run) => {
            add(A::TheTester, 1);
            add(A::TestExecutor, run.tests.len() as u64);
            let asserts = run
                .tests
                .iter()
                .filter(|t| {
                    t.failure_type.as_deref().is_some_and(|ft| ASSERTION_FAILURES.iter().any(|p| ft.contains(p)))
                })
                .count();
            add(A::AssertAndTested, asserts as u64);
            if run.with_coverage {
                add(A::GottaCatchEmAll, 1);
            }
            if let Some(cov) = &run.coverage {
                add(A::LineByLine, cov.totals.lines_covered);
                add(A::CheckYourMethods, cov.totals.methods_covered);
                add(A::CheckYourClasses, cov.totals.classes_covered);
                add(A::CheckYourBranches, cov.totals.branches_covered);
            }
            if let Boundaries::Multi(tiers) = lookup(A::TheTesterAdvanced).boundaries {
                let n = run.tests.len() as u64;
                let hits = tiers.map(|t| u64::from(t.y.is_some_and(|y| n >= y)));
                if hits.iter().any(|h| *h > 0) {
                    out.push(Increment::Tiers { achievement: A::TheTesterAdvanced, tiers: hits });
                }
            }
        }
        EventKind::SourceChanged(change) => {
            let mut tests_added = 0;
            let mut prints = 0;
            let (mut renames, mut extracts, mut inlines) = (0, 0, 0);
            let in_tests = change.file_class == FileClass::Test;
            for fact in &change.change_facts {
                match fact {
                    ChangeFact::TestMethodAdded { .. } => tests_added += 1,
                    ChangeFact::PrintStatementAdded { .. } => prints += 1,
                    ChangeFact::RefactoringDetected(r) if in_tests => match r.rtype {
                        RefactoringType::Rename => renames += 1,
                        RefactoringType::ExtractMethod => extracts += 1,
                        RefactoringType::InlineMethod => inlines += 1,
                    },
                    _ => {}
                }
            }
            add(A::SafetyFirst, tests_added);
            add(A::ConsoleIsTheNewDebugMode, prints);
            add(A::TheEponym, renames);
            add(A::MethodExtractor, extracts);
            add(A::MethodInliner, inlines);
        }
        EventKind::DebugRunStarted {} => add(A::TheDebugger, 1),
        EventKind::BreakpointSet { kind } => {
            add(A::TakeSomeBreaks, 1);
            let specific = match kind {
                BreakpointKind::Line => A::BreakTheLine,
                BreakpointKind::Method => A::BreakTheMethod,
                BreakpointKind::Conditional => A::MakeYourChoice,
                BreakpointKind::FieldWatchpoint => A::OnTheWatch,
            };
            add(specific, 1);
        }
    }
    out
}
