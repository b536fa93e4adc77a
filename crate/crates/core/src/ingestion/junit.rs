use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::xml::{attr, attr_u64, ElementStack};
use super::MalformedReport;
use crate::events::{TestCaseResult, TestStatus, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRunReport {
    pub suite_id: String,
    pub cases: Vec<TestCaseResult>,
    /// File modification time, when read from disk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub produced_at: Option<Timestamp>,
}

struct Suite {
    name: Option<String>,
    declared: Option<u64>,
    /// Cases seen inside this suite, skipped ones included.
    seen: u64,
}

struct Case {
    class_name: String,
    method_name: String,
    status: TestStatus,
    failure_type: Option<String>,
    skipped: bool,
}

fn malformed(reason: impl Into<String>) -> MalformedReport {
    MalformedReport::new("junit", reason)
}

/// Parses a JUnit XML report (`testsuite` or `testsuites` root). Skipped
/// test cases are not part of the result.
pub fn parse_junit_xml(bytes: &[u8]) -> Result<TestRunReport, MalformedReport> {
    parse(bytes).map_err(|e| e.in_format("junit"))
}

fn parse(bytes: &[u8]) -> Result<TestRunReport, MalformedReport> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut stack = ElementStack::default();
    let mut suites: Vec<Suite> = Vec::new();
    let mut case: Option<Case> = None;
    let mut cases = Vec::new();
    let mut root_name: Option<String> = None;
    let mut first_suite_name: Option<String> = None;

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| malformed(e.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                let name = stack.open(e)?;
                if stack.depth() == 1 {
                    if name != "testsuites" && name != "testsuite" {
                        return Err(malformed(format!("unexpected root element `{name}`")));
                    }
                    root_name = attr(e, "name")?;
                }
                match name.as_str() {
                    "testsuites" | "testsuite" => {
                        let suite_name = attr(e, "name")?;
                        if name == "testsuite" && first_suite_name.is_none() {
                            first_suite_name.clone_from(&suite_name);
                        }
                        suites.push(Suite { name: suite_name, declared: attr_u64(e, "tests")?, seen: 0 });
                    }
                    "testcase" => {
                        if case.is_some() {
                            return Err(malformed("nested testcase"));
                        }
                        case = Some(open_case(e, &suites)?);
                        for s in &mut suites {
                            s.seen += 1;
                        }
                    }
                    "failure" | "error" => {
                        if let Some(c) = case.as_mut().filter(|c| c.status == TestStatus::Passed) {
                            c.status = if name == "failure" { TestStatus::Failed } else { TestStatus::Errored };
                            c.failure_type = Some(attr(e, "type")?.unwrap_or_else(|| name.clone()));
                        }
                    }
                    "skipped" => {
                        if let Some(c) = case.as_mut() {
                            c.skipped = true;
                        }
                    }
                    _ => {}
                }
                if empty {
                    close(&name, &mut suites, &mut case, &mut cases)?;
                    stack.close_empty();
                }
            }
            Event::End(_) => {
                let name = stack.close()?;
                close(&name, &mut suites, &mut case, &mut cases)?;
            }
            Event::Text(_) | Event::CData(_) => {
                if stack.depth() == 0 {
                    return Err(malformed("text outside the root element"));
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    stack.finish()?;
    let suite_id = root_name.or(first_suite_name).unwrap_or_else(|| "junit".to_string());
    Ok(TestRunReport { suite_id, cases, produced_at: None })
}

fn open_case(e: &BytesStart<'_>, suites: &[Suite]) -> Result<Case, MalformedReport> {
    let method_name = attr(e, "name")?.ok_or_else(|| malformed("testcase without name"))?;
    let class_name = match attr(e, "classname")? {
        Some(c) => c,
        None => suites
            .iter()
            .rev()
            .find_map(|s| s.name.clone())
            .ok_or_else(|| malformed(format!("testcase `{method_name}` has no classname")))?,
    };
    Ok(Case { class_name, method_name, status: TestStatus::Passed, failure_type: None, skipped: false })
}

fn close(
    name: &str,
    suites: &mut Vec<Suite>,
    case: &mut Option<Case>,
    cases: &mut Vec<TestCaseResult>,
) -> Result<(), MalformedReport> {
    match name {
        "testsuites" | "testsuite" => {
            let suite = suites.pop().expect("suite stack follows element stack");
            if let Some(declared) = suite.declared {
                if declared != suite.seen {
                    return Err(malformed(format!("suite declares {declared} tests but contains {}", suite.seen)));
                }
            }
        }
        "testcase" => {
            let c = case.take().expect("testcase open");
            if !c.skipped {
                cases.push(TestCaseResult {
                    class_name: c.class_name,
                    method_name: c.method_name,
                    status: c.status,
                    failure_type: c.failure_type,
                });
            }
        }
        _ => {}
    }
    Ok(())
}
