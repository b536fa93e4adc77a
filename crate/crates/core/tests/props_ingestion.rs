use proptest::prelude::*;
use questd_core::events::{ChangeFact, Refactoring, RefactoringType, TestCaseResult, TestStatus};
use questd_core::ingestion::{
    classify_change, detect_refactorings, parse_junit_xml, parse_lcov, ClassCoverage, CoverageReport, FileSnapshot,
    IngestConfig, LcovMode, Matchers,
};

fn class_coverage() -> impl Strategy<Value = ClassCoverage> {
    ("[a-z]{1,8}(/[A-Z][a-z]{0,6}){1,2}\\.java", prop::array::uniform6(0u64..10_000)).prop_map(|(name, v)| {
        ClassCoverage {
            class_name: name,
            lines_covered: v[0].min(v[1]),
            lines_total: v[0].max(v[1]),
            branches_covered: v[2].min(v[3]),
            branches_total: v[2].max(v[3]),
            methods_covered: v[4].min(v[5]),
            methods_total: v[4].max(v[5]),
        }
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn junit_xml(suite: &str, cases: &[TestCaseResult]) -> String {
    let mut out =
        format!("<?xml version=\"1.0\"?>\n<testsuite name=\"{}\" tests=\"{}\">\n", escape(suite), cases.len());
    for c in cases {
        let open = format!("  <testcase name=\"{}\" classname=\"{}\"", escape(&c.method_name), escape(&c.class_name));
        match (&c.status, &c.failure_type) {
            (TestStatus::Passed, _) => out.push_str(&format!("{open}/>\n")),
            (s, ft) => {
                let tag = if *s == TestStatus::Failed { "failure" } else { "error" };
                let ty = ft.as_deref().unwrap_or(tag);
                out.push_str(&format!(
                    "{open}>\n    <{tag} type=\"{}\">trace &amp; more</{tag}>\n  </testcase>\n",
                    escape(ty)
                ));
            }
        }
    }
    out.push_str("</testsuite>\n");
    out
}

fn test_case() -> impl Strategy<Value = TestCaseResult> {
    ("[a-zA-Z_.$<>&\" ]{1,20}", "[a-zA-Z_][a-zA-Z0-9_()\\[\\] ]{0,20}", 0..3u8, "[a-zA-Z.]{1,30}").prop_map(
        |(class, method, s, ft)| match s {
            0 => TestCaseResult::passed(class, method),
            1 => TestCaseResult::failed(class, method, ft),
            _ => TestCaseResult {
                class_name: class,
                method_name: method,
                status: TestStatus::Errored,
                failure_type: Some(ft),
            },
        },
    )
}

/// Distinct statements so that no two generated bodies collide by chance.
fn statement(i: usize) -> String {
    match i % 4 {
        0 => format!("int v{i} = compute({i});"),
        1 => format!("list.add(\"item{i}\");"),
        2 => format!("assertEquals({i}, counter.next());"),
        _ => format!("if (flag{i}) {{ reset({i}); }}"),
    }
}

#[derive(Debug, Clone)]
struct Method {
    name: String,
    test: bool,
    body: Vec<String>,
}

fn render(methods: &[Method]) -> String {
    let mut out = String::from("package demo;\n\nimport org.junit.jupiter.api.Test;\n\nclass DemoTest {\n");
    for m in methods {
        if m.test {
            out.push_str("    @Test\n");
        }
        out.push_str(&format!("    void {}() {{\n", m.name));
        for s in &m.body {
            out.push_str(&format!("        {s}\n"));
        }
        out.push_str("    }\n\n");
    }
    out.push_str("}\n");
    out
}

fn java_file() -> impl Strategy<Value = Vec<Method>> {
    prop::collection::vec((2..7usize, any::<bool>()), 1..6).prop_map(|specs| {
        let mut next = 0;
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (len, test))| {
                let body = (0..len)
                    .map(|_| {
                        next += 1;
                        statement(next)
                    })
                    .collect();
                Method { name: format!("method{i}"), test, body }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lcov_round_trip(classes in prop::collection::vec(class_coverage(), 0..8)) {
        let report = CoverageReport::from_classes(classes);
        let text = report.to_lcov();
        let once = parse_lcov(&text, LcovMode::Strict).unwrap();
        prop_assert_eq!(&once, &report);
        prop_assert_eq!(parse_lcov(&once.to_lcov(), LcovMode::Strict).unwrap(), once);
    }

    #[test]
    fn junit_write_parse_identity(suite in "[a-zA-Z.]{1,20}", cases in prop::collection::vec(test_case(), 0..12)) {
        let parsed = parse_junit_xml(junit_xml(&suite, &cases).as_bytes()).unwrap();
        prop_assert_eq!(parsed.suite_id, suite);
        prop_assert_eq!(parsed.cases, cases);
    }

    #[test]
    fn rename_is_symmetric(methods in java_file(), pick in any::<prop::sample::Index>()) {
        let i = pick.index(methods.len());
        let mut renamed = methods.clone();
        renamed[i].name = "renamedMethod".into();
        let (a, b) = (render(&methods), render(&renamed));
        let fwd = detect_refactorings(&a, &b);
        let back = detect_refactorings(&b, &a);
        let want = |target: &str, source: &str| Refactoring {
            rtype: RefactoringType::Rename,
            target: target.into(),
            source: source.into(),
        };
        prop_assert_eq!(fwd, vec![want("renamedMethod", &methods[i].name)]);
        prop_assert_eq!(back, vec![want(&methods[i].name, "renamedMethod")]);
    }

    #[test]
    fn extract_and_inline_swap(
        methods in java_file(),
        pick in any::<prop::sample::Index>(),
        start in any::<prop::sample::Index>(),
        len in 1..3usize,
    ) {
        let host = pick.index(methods.len());
        let body = &methods[host].body;
        let s = start.index(body.len());
        let e = (s + len).min(body.len());
        let moved: Vec<String> = body[s..e].to_vec();
        let mut after = methods.clone();
        after[host].body.splice(s..e, ["extractedHelper();".to_string()]);
        after.push(Method { name: "extractedHelper".into(), test: false, body: moved });
        let (a, b) = (render(&methods), render(&after));
        let host_name = methods[host].name.clone();
        prop_assert_eq!(
            detect_refactorings(&a, &b),
            vec![Refactoring { rtype: RefactoringType::ExtractMethod, target: "extractedHelper".into(), source: host_name.clone() }]
        );
        prop_assert_eq!(
            detect_refactorings(&b, &a),
            vec![Refactoring { rtype: RefactoringType::InlineMethod, target: "extractedHelper".into(), source: host_name }]
        );
    }

    #[test]
    fn unchanged_tokens_yield_no_specific_facts(methods in java_file(), pad in "[ \t\n]{1,4}") {
        let roots = Matchers::new(&IngestConfig::default()).unwrap().test_roots;
        let src = render(&methods);
        let prev = FileSnapshot::new("src/test/java/demo/DemoTest.java", src.as_bytes(), &roots);
        prop_assert_eq!(classify_change(Some(&prev), src.as_bytes(), "System.out.println"), vec![]);
        let spaced = src.replace(";\n", &format!(";{pad}\n"));
        let facts = classify_change(Some(&prev), spaced.as_bytes(), "System.out.println");
        prop_assert!(facts.iter().all(|f| matches!(f, ChangeFact::GenericEdit { .. })), "{:?}", facts);
        prop_assert!(detect_refactorings(&src, &spaced).is_empty());
    }
}
