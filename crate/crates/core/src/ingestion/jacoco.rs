use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::coverage::{ClassCoverage, CoverageReport, CoverageTotals};
use super::xml::{attr, attr_u64, ElementStack};
use super::MalformedReport;

fn malformed(reason: impl Into<String>) -> MalformedReport {
    MalformedReport::new("jacoco", reason)
}

#[derive(Default, Clone, Copy)]
struct Counter {
    covered: u64,
    total: u64,
}

#[derive(Default)]
struct Counters {
    line: Option<Counter>,
    branch: Option<Counter>,
    method: Option<Counter>,
    class: Option<Counter>,
}

impl Counters {
    fn set(&mut self, e: &BytesStart<'_>) -> Result<(), MalformedReport> {
        let kind = attr(e, "type")?.ok_or_else(|| malformed("counter without type"))?;
        let missed = attr_u64(e, "missed")?.ok_or_else(|| malformed("counter without missed"))?;
        let covered = attr_u64(e, "covered")?.ok_or_else(|| malformed("counter without covered"))?;
        let total = covered.checked_add(missed).ok_or_else(|| malformed("counter overflow"))?;
        let c = Some(Counter { covered, total });
        match kind.as_str() {
            "LINE" => self.line = c,
            "BRANCH" => self.branch = c,
            "METHOD" => self.method = c,
            "CLASS" => self.class = c,
            // INSTRUCTION and COMPLEXITY are not tracked.
            _ => {}
        }
        Ok(())
    }
}

/// Parses a JaCoCo XML report. Report-level counters give the totals;
/// class-level counters give `per_class`. Missing report-level counters are
/// summed from the classes.
pub fn parse_jacoco_xml(bytes: &[u8]) -> Result<CoverageReport, MalformedReport> {
    parse(bytes).map_err(|e| e.in_format("jacoco"))
}

fn parse(bytes: &[u8]) -> Result<CoverageReport, MalformedReport> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut stack = ElementStack::default();
    let mut report = Counters::default();
    let mut current: Option<(String, Counters)> = None;
    let mut classes = Vec::new();

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| malformed(e.to_string()))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                let name = stack.open(e)?;
                if stack.depth() == 1 && name != "report" {
                    return Err(malformed(format!("unexpected root element `{name}`")));
                }
                match name.as_str() {
                    "class" => {
                        if current.is_some() {
                            return Err(malformed("nested class element"));
                        }
                        let raw = attr(e, "name")?.ok_or_else(|| malformed("class without name"))?;
                        current = Some((raw.replace('/', "."), Counters::default()));
                    }
                    "counter" => match stack.parent() {
                        Some("report") => report.set(e)?,
                        Some("class") => {
                            if let Some((_, c)) = current.as_mut() {
                                c.set(e)?;
                            }
                        }
                        _ => {}
                    },
                    _ => {}
                }
                if empty {
                    if name == "class" {
                        classes.extend(current.take().map(finish_class));
                    }
                    stack.close_empty();
                }
            }
            Event::End(_) => {
                if stack.close()? == "class" {
                    classes.extend(current.take().map(finish_class));
                }
            }
            Event::Text(_) | Event::CData(_) if stack.depth() == 0 => {
                return Err(malformed("text outside the root element"));
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    stack.finish()?;

    let summed = CoverageReport::from_classes(classes);
    let pick = |c: Option<Counter>, covered: u64, total: u64| c.map_or((covered, total), |c| (c.covered, c.total));
    let s = &summed.totals;
    let (lines_covered, lines_total) = pick(report.line, s.lines_covered, s.lines_total);
    let (branches_covered, branches_total) = pick(report.branch, s.branches_covered, s.branches_total);
    let (methods_covered, methods_total) = pick(report.method, s.methods_covered, s.methods_total);
    let (classes_covered, classes_total) = pick(report.class, s.classes_covered, s.classes_total);
    let out = CoverageReport {
        totals: CoverageTotals {
            lines_covered,
            lines_total,
            branches_covered,
            branches_total,
            methods_covered,
            methods_total,
            classes_covered,
            classes_total,
        },
        per_class: summed.per_class,
    };
    if !out.is_consistent() {
        return Err(malformed("report totals disagree with class counters"));
    }
    Ok(out)
}

fn finish_class((class_name, c): (String, Counters)) -> ClassCoverage {
    let get = |c: Option<Counter>| c.unwrap_or_default();
    ClassCoverage {
        class_name,
        lines_covered: get(c.line).covered,
        lines_total: get(c.line).total,
        branches_covered: get(c.branch).covered,
        branches_total: get(c.branch).total,
        methods_covered: get(c.method).covered,
        methods_total: get(c.method).total,
    }
}
