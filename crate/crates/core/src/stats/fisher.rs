use serde::{Deserialize, Serialize};

use super::StatsError;

/// `[[a, b], [c, d]]`: rows are groups, columns outcome / not outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl Table2x2 {
    pub fn new(rows: [[u64; 2]; 2]) -> Table2x2 {
        Table2x2 { a: rows[0][0], b: rows[0][1], c: rows[1][0], d: rows[1][1] }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    fn margins(&self) -> [u64; 4] {
        [self.a + self.b, self.c + self.d, self.a + self.c, self.b + self.d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub p_value: f64,
    /// A row or column sums to zero; `p_value` is 1 by convention.
    pub degenerate: bool,
}

const REL_TOLERANCE: f64 = 1e-7;

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// Two-sided Fisher exact test: the probability of all tables with the
/// observed margins that are no more likely than the observed table.
pub fn fisher_exact_2x2(t: Table2x2) -> Result<FisherResult, StatsError> {
    let n = t.total();
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let [r1, r2, c1, c2] = t.margins();
    if [r1, r2, c1, c2].contains(&0) {
        return Ok(FisherResult { p_value: 1.0, degenerate: true });
    }
    let lf = ln_factorials(n);
    let f = |k: u64| lf[k as usize];
    let fixed = f(r1) + f(r2) + f(c1) + f(c2) - f(n);
    // Probability of the table whose top-left cell is `a`.
    let ln_p = |a: u64| fixed - f(a) - f(r1 - a) - f(c1 - a) - f(r2 + a - c1);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let observed = ln_p(t.a).exp();
    let p: f64 = (lo..=hi).map(|a| ln_p(a).exp()).filter(|p| *p <= observed * (1.0 + REL_TOLERANCE)).sum();
    Ok(FisherResult { p_value: p.min(1.0), degenerate: false })
}
