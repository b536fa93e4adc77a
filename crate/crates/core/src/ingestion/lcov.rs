use std::collections::BTreeMap;

use super::coverage::{ClassCoverage, CoverageReport};
use super::MalformedReport;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LcovMode {
    /// Unknown record types and unterminated sections are errors.
    #[default]
    Strict,
    /// Unknown record types are skipped; an open section is closed at EOF
    /// or at the next `SF`.
    Lenient,
}

fn malformed(line: usize, reason: impl Into<String>) -> MalformedReport {
    MalformedReport::new("lcov", format!("line {line}: {}", reason.into()))
}

#[derive(Default)]
struct Section {
    file: String,
    lf: Option<u64>,
    lh: Option<u64>,
    brf: Option<u64>,
    brh: Option<u64>,
    fnf: Option<u64>,
    fnh: Option<u64>,
    /// line -> hits
    da: BTreeMap<u64, u64>,
    /// (line, block, branch) -> taken
    brda: BTreeMap<(String, String, String), u64>,
    /// function name -> hits
    fnda: BTreeMap<String, u64>,
}

impl Section {
    fn finish(self, line: usize) -> Result<ClassCoverage, MalformedReport> {
        let lines_total = self.lf.unwrap_or(self.da.len() as u64);
        let lines_covered = self.lh.unwrap_or_else(|| covered(&self.da));
        let branches_total = self.brf.unwrap_or(self.brda.len() as u64);
        let branches_covered = self.brh.unwrap_or_else(|| covered(&self.brda));
        let methods_total = self.fnf.unwrap_or(self.fnda.len() as u64);
        let methods_covered = self.fnh.unwrap_or_else(|| covered(&self.fnda));
        if lines_covered > lines_total || branches_covered > branches_total || methods_covered > methods_total {
            return Err(malformed(line, format!("hit count exceeds found count in `{}`", self.file)));
        }
        Ok(ClassCoverage {
            class_name: self.file,
            lines_covered,
            lines_total,
            branches_covered,
            branches_total,
            methods_covered,
            methods_total,
        })
    }
}

fn covered<K>(m: &BTreeMap<K, u64>) -> u64 {
    m.values().filter(|h| **h > 0).count() as u64
}

fn count(line: usize, v: &str) -> Result<u64, MalformedReport> {
    v.trim().parse().map_err(|_| malformed(line, format!("expected a count, got `{v}`")))
}

/// Parses an LCOV trace; each `SF` section becomes one `per_class` entry.
pub fn parse_lcov(text: &str, mode: LcovMode) -> Result<CoverageReport, MalformedReport> {
    let mut classes = Vec::new();
    let mut section: Option<Section> = None;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let n = idx + 1;
        last_line = n;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "end_of_record" {
            let s = section.take().ok_or_else(|| malformed(n, "end_of_record outside a section"))?;
            classes.push(s.finish(n)?);
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            if mode == LcovMode::Lenient {
                continue;
            }
            return Err(malformed(n, format!("not a record: `{line}`")));
        };
        match key {
            "TN" | "VER" => {}
            "SF" => {
                if let Some(open) = section.take() {
                    if mode == LcovMode::Strict {
                        return Err(malformed(n, "SF inside an unterminated section"));
                    }
                    classes.push(open.finish(n)?);
                }
                section = Some(Section { file: value.to_string(), ..Section::default() });
            }
            "FN" | "FNL" | "FNA" | "FNDA" | "FNF" | "FNH" | "BRDA" | "BRF" | "BRH" | "DA" | "LF" | "LH" => {
                let s = section.as_mut().ok_or_else(|| malformed(n, format!("`{key}` outside a section")))?;
                apply_record(s, n, key, value)?;
            }
            _ if mode == LcovMode::Lenient => {}
            _ => return Err(malformed(n, format!("unknown record type `{key}`"))),
        }
    }
    if let Some(open) = section {
        if mode == LcovMode::Strict {
            return Err(malformed(last_line, "missing end_of_record"));
        }
        classes.push(open.finish(last_line)?);
    }
    Ok(CoverageReport::from_classes(classes))
}

fn apply_record(s: &mut Section, n: usize, key: &str, value: &str) -> Result<(), MalformedReport> {
    let fields: Vec<&str> = value.split(',').collect();
    match key {
        "LF" => s.lf = Some(count(n, value)?),
        "LH" => s.lh = Some(count(n, value)?),
        "BRF" => s.brf = Some(count(n, value)?),
        "BRH" => s.brh = Some(count(n, value)?),
        "FNF" => s.fnf = Some(count(n, value)?),
        "FNH" => s.fnh = Some(count(n, value)?),
        "DA" => {
            if fields.len() < 2 {
                return Err(malformed(n, "DA needs line,hits"));
            }
            let line = count(n, fields[0])?;
            let hits = count(n, fields[1])?;
            let e = s.da.entry(line).or_default();
            *e = e.saturating_add(hits);
        }
        "BRDA" => {
            if fields.len() != 4 {
                return Err(malformed(n, "BRDA needs line,block,branch,taken"));
            }
            let taken = if fields[3].trim() == "-" { 0 } else { count(n, fields[3])? };
            let key = (fields[0].to_string(), fields[1].to_string(), fields[2].to_string());
            let e = s.brda.entry(key).or_default();
            *e = e.saturating_add(taken);
        }
        "FNDA" => {
            if fields.len() < 2 {
                return Err(malformed(n, "FNDA needs hits,name"));
            }
            let hits = count(n, fields[0])?;
            let e = s.fnda.entry(fields[1..].join(",")).or_default();
            *e = e.saturating_add(hits);
        }
        // FN/FNL/FNA only declare functions; FNDA carries their hits.
        _ => {}
    }
    Ok(())
}
