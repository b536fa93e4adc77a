use std::collections::BTreeMap;

use proptest::prelude::*;
use questd_core::catalog::{catalog, level_for, lookup, next_target, AchievementId, Boundaries, Level, Progress};
use questd_core::engine::{load_state, replay, save_state, EngineConfig, EngineState, LogEntry, NotificationKind};
use questd_core::events::{
    step_detectors, BreakpointKind, ChangeFact, DetectorState, DevEvent, EventKind, FileClass, Refactoring,
    RefactoringType, SourceChange, TestCaseResult, TestRun,
};
use questd_core::ingestion::{ClassCoverage, CoverageReport};

const CLASSES: [&str; 3] = ["a.FooTest", "a.BarTest", "b.BazTest"];
const METHODS: [&str; 3] = ["one", "two", "three"];

fn case() -> impl Strategy<Value = TestCaseResult> {
    (0..3usize, 0..3usize, 0..4u8).prop_map(|(c, m, s)| match s {
        0 => TestCaseResult::failed(CLASSES[c], METHODS[m], "java.lang.AssertionError"),
        _ => TestCaseResult::passed(CLASSES[c], METHODS[m]),
    })
}

fn class_coverage() -> impl Strategy<Value = ClassCoverage> {
    (0..5usize, 0..400u64, 0..400u64, 0..30u64, 0..30u64, 0..100u64, 0..100u64).prop_map(
        |(n, l1, l2, m1, m2, b1, b2)| ClassCoverage {
            class_name: format!("p.C{n}"),
            lines_covered: l1.min(l2),
            lines_total: l1.max(l2),
            methods_covered: m1.min(m2),
            methods_total: m1.max(m2),
            branches_covered: b1.min(b2),
            branches_total: b1.max(b2),
        },
    )
}

fn fact() -> impl Strategy<Value = ChangeFact> {
    prop_oneof![
        (0..3usize).prop_map(|m| ChangeFact::TestMethodAdded {
            class_name: CLASSES[0].into(),
            method_name: METHODS[m].into()
        }),
        (0..3usize, 0..3usize).prop_map(|(c, m)| ChangeFact::AssertionAddedToTest {
            class_name: CLASSES[c].into(),
            method_name: METHODS[m].into()
        }),
        Just(ChangeFact::PrintStatementAdded { line: "System.out.println(x);".into() }),
        (0..3u8, 0..3usize).prop_map(|(t, m)| ChangeFact::RefactoringDetected(Refactoring {
            rtype: [RefactoringType::Rename, RefactoringType::ExtractMethod, RefactoringType::InlineMethod][t as usize],
            target: "renamed".into(),
            source: METHODS[m].into(),
        })),
        Just(ChangeFact::GenericEdit {}),
    ]
}

fn kind() -> impl Strategy<Value = EventKind> {
    prop_oneof![
        3 => (prop::collection::vec(case(), 0..6), prop::option::of(prop::collection::vec(class_coverage(), 0..4)))
            .prop_map(|(tests, cov)| {
                let coverage = cov.map(CoverageReport::from_classes);
                EventKind::TestRunFinished(TestRun {
                    suite_id: "S".into(),
                    tests,
                    with_coverage: coverage.is_some(),
                    coverage,
                })
            }),
        // Big suites for the multi-parameter achievement.
        1 => (100..130usize).prop_map(|n| EventKind::TestRunFinished(TestRun {
            suite_id: "Big".into(),
            tests: (0..n).map(|i| TestCaseResult::passed("g.GenTest", format!("c{i}"))).collect(),
            with_coverage: false,
            coverage: None,
        })),
        3 => (any::<bool>(), prop::collection::vec(fact(), 1..4)).prop_map(|(test, change_facts)| {
            let (path, file_class) = if test {
                ("src/test/java/a/FooTest.java", FileClass::Test)
            } else {
                ("src/main/java/a/Foo.java", FileClass::Production)
            };
            EventKind::SourceChanged(SourceChange { path: path.into(), file_class, change_facts })
        }),
        1 => Just(EventKind::DebugRunStarted {}),
        2 => (0..4u8).prop_map(|k| EventKind::BreakpointSet {
            kind: [BreakpointKind::Line, BreakpointKind::Method, BreakpointKind::Conditional, BreakpointKind::FieldWatchpoint]
                [k as usize]
        }),
    ]
}

fn events(max: usize) -> impl Strategy<Value = Vec<DevEvent>> {
    prop::collection::vec((0..200_000i64, kind()), 0..max).prop_map(|v| {
        let mut ts = 1_000_000;
        v.into_iter()
            .map(|(gap, k)| {
                ts += gap;
                DevEvent::new(ts, "s", k)
            })
            .collect()
    })
}

fn as_log(events: &[DevEvent]) -> Vec<LogEntry> {
    events.iter().cloned().map(LogEntry::Event).collect()
}

fn le(a: &Progress, b: &Progress) -> bool {
    match (a, b) {
        (Progress::Scalar(x), Progress::Scalar(y)) => x <= y,
        (Progress::Counters(x), Progress::Counters(y)) => x.iter().zip(y).all(|(p, q)| p <= q),
        _ => false,
    }
}

fn config() -> EngineConfig {
    EngineConfig { idle_ms: 300_000, ..EngineConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn replay_is_deterministic(evs in events(40)) {
        let a = replay(&as_log(&evs), config()).unwrap();
        let b = replay(&as_log(&evs), config()).unwrap();
        prop_assert_eq!(a.state.canonical_json(), b.state.canonical_json());
        prop_assert_eq!(a.notifications, b.notifications);
    }

    #[test]
    fn progress_and_levels_never_decrease(evs in events(40)) {
        let mut s = EngineState::new();
        for e in &evs {
            let before = s.clone();
            s.apply(e).unwrap();
            for def in catalog() {
                prop_assert!(le(&before.progress(def.id), &s.progress(def.id)), "{}", def.id.as_str());
                prop_assert!(before.level(def.id) <= s.level(def.id));
                prop_assert_eq!(s.level(def.id), level_for(def, &s.progress(def.id)));
            }
        }
    }

    #[test]
    fn notification_policy_holds(evs in events(60)) {
        let r = replay(&as_log(&evs), config()).unwrap();
        let mut seen_levels: BTreeMap<AchievementId, Vec<Level>> = BTreeMap::new();
        let mut quartiles: BTreeMap<AchievementId, Vec<u8>> = BTreeMap::new();
        for n in &r.notifications {
            match &n.kind {
                NotificationKind::LevelUp { achievement, level, .. } => {
                    let levels = seen_levels.entry(*achievement).or_default();
                    // One level-up per level, in ascending order.
                    prop_assert!(levels.last().is_none_or(|l| l < level));
                    prop_assert_eq!(level.rank(), levels.len() as u32 + 1);
                    levels.push(*level);
                    quartiles.insert(*achievement, Vec::new());
                }
                NotificationKind::Progress { achievement, quartile, fraction, next_level, .. } => {
                    let q = quartiles.entry(*achievement).or_default();
                    prop_assert!(q.last().is_none_or(|l| l < quartile));
                    prop_assert!((1..=3).contains(quartile));
                    prop_assert_eq!(*fraction, f64::from(*quartile) / 4.0);
                    prop_assert_ne!(*next_level, Level::None);
                    q.push(*quartile);
                    prop_assert!(q.len() <= 3);
                }
                NotificationKind::Encouragement { .. } => {}
            }
        }
    }

    #[test]
    fn sessions_interleave_to_the_same_totals(a in events(20), b in events(20)) {
        // Progress is global: only counting events, whose increments do not
        // depend on what came before.
        let counting = |e: &DevEvent| match &e.kind {
            EventKind::TestRunFinished(r) => r.tests.iter().all(|t| t.failure_type.is_none()),
            EventKind::SourceChanged(c) => c.change_facts.iter().all(|f| {
                matches!(f, ChangeFact::TestMethodAdded { .. } | ChangeFact::PrintStatementAdded { .. })
            }),
            _ => true,
        };
        let a: Vec<DevEvent> = a.into_iter().filter(counting).map(|mut e| { e.session_id = "A".into(); e }).collect();
        let b: Vec<DevEvent> = b.into_iter().filter(counting).map(|mut e| { e.session_id = "B".into(); e }).collect();
        let mut merged: Vec<DevEvent> = a.iter().chain(&b).cloned().collect();
        merged.sort_by_key(|e| e.ts);
        let last_a = a.last().map_or(0, |e| e.ts);
        let concatenated: Vec<DevEvent> =
            a.iter().cloned().chain(b.iter().cloned().map(|mut e| { e.ts += last_a; e })).collect();
        let x = replay(&as_log(&merged), config()).unwrap().state;
        let y = replay(&as_log(&concatenated), config()).unwrap().state;
        prop_assert_eq!(&x.progress, &y.progress);
        prop_assert_eq!(&x.awarded, &y.awarded);
    }

    #[test]
    fn reset_then_same_events_equals_fresh(first in events(20), second in events(20)) {
        let mut s = EngineState::new();
        for e in &first {
            s.apply(e).unwrap();
        }
        s.reset(true).unwrap();
        let mut fresh = EngineState::new();
        for e in &second {
            s.apply(e).unwrap();
            fresh.apply(e).unwrap();
        }
        prop_assert_eq!(&s.progress, &fresh.progress);
        prop_assert_eq!(&s.awarded, &fresh.awarded);
        prop_assert_eq!(&s.detector, &fresh.detector);
        prop_assert_eq!(&s.reviewed_classes, &fresh.reviewed_classes);
        prop_assert_eq!(&s.notified_quartiles, &fresh.notified_quartiles);
    }

    #[test]
    fn save_load_round_trip(evs in events(30), entries in 0u64..1000) {
        let r = replay(&as_log(&evs), config()).unwrap();
        let bytes = save_state(&r.state, entries, r.events_applied);
        let back = load_state(&bytes).unwrap();
        prop_assert_eq!(&back.state, &r.state);
        prop_assert_eq!(back.log_entries, entries);
        let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        v["digest"] = serde_json::Value::String("0".repeat(64));
        prop_assert!(load_state(&serde_json::to_vec(&v).unwrap()).is_err());
    }

    #[test]
    fn detector_step_is_pure(evs in events(30)) {
        let mut s = DetectorState::default();
        for e in &evs {
            let (a, ia) = step_detectors(&s, e);
            let (b, ib) = step_detectors(&s, e);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(ia, ib);
            s = a;
        }
    }

    #[test]
    fn fixer_achievements_are_exclusive_and_need_a_pass(evs in events(50)) {
        // Count fail→pass cycles per test directly and compare the two
        // fixer achievements against them.
        let r = replay(&as_log(&evs), config()).unwrap();
        let value = |a| r.state.value(a);
        let mut cycles = 0u64;
        let mut failing: BTreeMap<(String, String), ()> = BTreeMap::new();
        for e in &evs {
            match &e.kind {
                EventKind::TestRunFinished(run) => {
                    for t in &run.tests {
                        let key = (t.class_name.clone(), t.method_name.clone());
                        if t.failure_type.is_none() {
                            cycles += u64::from(failing.remove(&key).is_some());
                        } else {
                            failing.insert(key, ());
                        }
                    }
                }
                EventKind::SourceChanged(c) => {
                    for f in &c.change_facts {
                        if let ChangeFact::RefactoringDetected(r) = f {
                            if r.rtype == RefactoringType::Rename && c.file_class == FileClass::Test {
                                failing.retain(|(cls, m), _| !(m == &r.source && cls.ends_with("FooTest")));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        prop_assert!(value(AchievementId::BugFinder) + value(AchievementId::TestFixer) <= cycles);
    }

    #[test]
    fn double_check_ignores_failing_tests(evs in events(40)) {
        // A sequence where every run fails yields no double-check.
        let failing: Vec<DevEvent> = evs
            .into_iter()
            .map(|mut e| {
                if let EventKind::TestRunFinished(run) = &mut e.kind {
                    for t in &mut run.tests {
                        *t = TestCaseResult::failed(t.class_name.clone(), t.method_name.clone(), "java.lang.Error");
                    }
                }
                e
            })
            .collect();
        let r = replay(&as_log(&failing), config()).unwrap();
        prop_assert_eq!(r.state.value(AchievementId::DoubleCheck), 0);
        prop_assert_eq!(r.state.value(AchievementId::BugFinder), 0);
        prop_assert_eq!(r.state.value(AchievementId::TestFixer), 0);
    }

    #[test]
    fn scalar_levels_are_monotone_and_inclusive(v in 0u64..200_000, d in 0u64..50_000) {
        for def in catalog() {
            let Boundaries::Scalar(b) = def.boundaries else { continue };
            let (p, q) = (Progress::Scalar(v), Progress::Scalar(v + d));
            prop_assert!(level_for(def, &p) <= level_for(def, &q));
            prop_assert_eq!(next_target(def, &p).is_none(), level_for(def, &p) == Level::Platinum);
            for (t, bound) in b.iter().enumerate() {
                prop_assert_eq!(level_for(def, &Progress::Scalar(*bound)), Level::from_tier(t));
            }
        }
    }

    #[test]
    fn multi_levels_are_monotone(c in prop::array::uniform4(0u64..600), d in prop::array::uniform4(0u64..100)) {
        for def in catalog().iter().filter(|d| d.boundaries.is_multi()) {
            let more = [c[0] + d[0], c[1] + d[1], c[2] + d[2], c[3] + d[3]];
            let (p, q) = (Progress::Counters(c), Progress::Counters(more));
            prop_assert!(level_for(def, &p) <= level_for(def, &q));
            prop_assert_eq!(next_target(def, &p).is_none(), level_for(def, &p) == Level::Platinum);
        }
    }
}

#[test]
fn test_executor_ramp_notifications() {
    // One test per run from 0 to 100.
    let mut s = EngineState::new();
    let mut seen = Vec::new();
    for i in 0..100 {
        let e = DevEvent::new(
            i,
            "s",
            EventKind::TestRunFinished(TestRun {
                suite_id: "S".into(),
                tests: vec![TestCaseResult::passed("T", format!("t{i}"))],
                with_coverage: false,
                coverage: None,
            }),
        );
        for n in s.apply(&e).unwrap() {
            if n.kind.achievement() == AchievementId::TestExecutor {
                seen.push(n.to_string());
            }
        }
    }
    assert_eq!(
        seen,
        [
            "[PROGRESS] Test Executor 25% of the way to Bronze (1 tests)",
            "[PROGRESS] Test Executor 50% of the way to Bronze (2 tests)",
            "[LEVEL-UP] Test Executor → Bronze (3 tests)",
            "[PROGRESS] Test Executor 25% of the way to Silver (28 tests)",
            "[PROGRESS] Test Executor 50% of the way to Silver (52 tests)",
            "[PROGRESS] Test Executor 75% of the way to Silver (76 tests)",
            "[LEVEL-UP] Test Executor → Silver (100 tests)",
        ]
    );
    assert_eq!(lookup(AchievementId::TestExecutor).boundaries.threshold(Level::Silver), Some(100));
}
