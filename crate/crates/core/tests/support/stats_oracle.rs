//! Brute-force reference implementations of the exact tests.

/// Plain midranks, 1-based, from a fresh sort.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|v| {
            let first = sorted.iter().position(|s| s == v).unwrap() + 1;
            let last = sorted.iter().rposition(|s| s == v).unwrap() + 1;
            (first + last) as f64 / 2.0
        })
        .collect()
}

pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Permutation p-value over every way of choosing which pooled values are
/// labelled `x`, measured by the distance of x's rank sum from its mean.
pub fn wilcoxon_brute(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let n = x.len();
    let mean = n as f64 * (pooled.len() + 1) as f64 / 2.0;
    let observed = (ranks[..n].iter().sum::<f64>() - mean).abs();
    let all = subsets(pooled.len(), n);
    let extreme = all.iter().filter(|s| (s.iter().map(|i| ranks[*i]).sum::<f64>() - mean).abs() >= observed - 1e-9);
    extreme.count() as f64 / all.len() as f64
}

pub fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

/// Exact rational Fisher p-value: tables with the observed margins whose
/// hypergeometric weight is at most the observed one.
pub fn fisher_brute(t: [[u64; 2]; 2]) -> Option<f64> {
    let (r1, r2) = (t[0][0] + t[0][1], t[1][0] + t[1][1]);
    let c1 = t[0][0] + t[1][0];
    let n = r1 + r2;
    if [r1, r2, c1, n - c1].contains(&0) {
        return None;
    }
    let weight = |a: u64| choose(r1, a) * choose(r2, c1 - a);
    let obs = weight(t[0][0]);
    let num: u128 = (0..=r1.min(c1)).filter(|a| c1 - a <= r2).map(weight).filter(|w| *w <= obs).sum();
    Some(num as f64 / choose(n, c1) as f64)
}
