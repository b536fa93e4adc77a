use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageTotals {
    pub lines_covered: u64,
    pub lines_total: u64,
    pub branches_covered: u64,
    pub branches_total: u64,
    pub methods_covered: u64,
    pub methods_total: u64,
    pub classes_covered: u64,
    pub classes_total: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCoverage {
    pub class_name: String,
    pub lines_covered: u64,
    pub lines_total: u64,
    pub branches_covered: u64,
    pub branches_total: u64,
    pub methods_covered: u64,
    pub methods_total: u64,
}

impl ClassCoverage {
    /// A class counts as covered once any line or method of it ran.
    pub fn is_covered(&self) -> bool {
        self.lines_covered > 0 || self.methods_covered > 0
    }

    fn counters_consistent(&self) -> bool {
        self.lines_covered <= self.lines_total
            && self.branches_covered <= self.branches_total
            && self.methods_covered <= self.methods_total
    }
}

/// Coverage counters of one coverage run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageReport {
    pub totals: CoverageTotals,
    #[serde(default)]
    pub per_class: Vec<ClassCoverage>,
}

impl CoverageReport {
    /// Builds a report whose totals are the sums over `per_class`.
    pub fn from_classes(per_class: Vec<ClassCoverage>) -> CoverageReport {
        let mut totals = CoverageTotals::default();
        for c in &per_class {
            totals.lines_covered = totals.lines_covered.saturating_add(c.lines_covered);
            totals.lines_total = totals.lines_total.saturating_add(c.lines_total);
            totals.branches_covered = totals.branches_covered.saturating_add(c.branches_covered);
            totals.branches_total = totals.branches_total.saturating_add(c.branches_total);
            totals.methods_covered = totals.methods_covered.saturating_add(c.methods_covered);
            totals.methods_total = totals.methods_total.saturating_add(c.methods_total);
            totals.classes_total = totals.classes_total.saturating_add(1);
            totals.classes_covered += u64::from(c.is_covered());
        }
        CoverageReport { totals, per_class }
    }

    /// `covered <= total` everywhere and, with per-class data, totals equal
    /// the per-class sums.
    pub fn is_consistent(&self) -> bool {
        let t = &self.totals;
        let pairs_ok = t.lines_covered <= t.lines_total
            && t.branches_covered <= t.branches_total
            && t.methods_covered <= t.methods_total
            && t.classes_covered <= t.classes_total;
        if !pairs_ok || !self.per_class.iter().all(ClassCoverage::counters_consistent) {
            return false;
        }
        if self.per_class.is_empty() {
            return true;
        }
        let sums = CoverageReport::from_classes(self.per_class.clone()).totals;
        sums.lines_covered == t.lines_covered
            && sums.lines_total == t.lines_total
            && sums.branches_covered == t.branches_covered
            && sums.branches_total == t.branches_total
            && sums.methods_covered == t.methods_covered
            && sums.methods_total == t.methods_total
    }

    /// Writes the per-class data as an LCOV trace (one `SF` section per
    /// class, summary records only).
    pub fn to_lcov(&self) -> String {
        let mut out = String::new();
        for c in &self.per_class {
            let _ = writeln!(out, "SF:{}", c.class_name);
            let _ = writeln!(out, "FNF:{}\nFNH:{}", c.methods_total, c.methods_covered);
            let _ = writeln!(out, "BRF:{}\nBRH:{}", c.branches_total, c.branches_covered);
            let _ = writeln!(out, "LF:{}\nLH:{}", c.lines_total, c.lines_covered);
            out.push_str("end_of_record\n");
        }
        out
    }
}
