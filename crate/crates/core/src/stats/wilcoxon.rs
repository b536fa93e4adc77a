//! Two-sided Wilcoxon–Mann–Whitney rank-sum test.
//!
//! Ranks are pooled midranks, kept doubled so that ties stay integral. The
//! statistic is the doubled rank sum `S` of the smaller sample; an assignment
//! is at least as extreme as the observed one when `|S - E| >= |S_obs - E|`
//! with `E = k (N + 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Execution, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Approximation {
    Normal,
    MonteCarlo { draws: u64, seed: u64 },
}

impl Approximation {
    pub fn monte_carlo(seed: u64) -> Approximation {
        Approximation::MonteCarlo { draws: 1_000_000, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WilcoxonOptions {
    /// Up to this many pooled values every assignment is enumerated.
    pub enumeration_cap: usize,
    /// Up to this many pooled values the exact distribution is counted.
    pub exact_cap: usize,
    /// Used above `exact_cap`; without it such inputs are rejected.
    pub approximation: Option<Approximation>,
    pub execution: Execution,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        WilcoxonOptions { enumeration_cap: 25, exact_cap: 100, approximation: None, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Enumeration,
    ExactCount,
    MonteCarlo { draws: u64, seed: u64 },
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub p_value: f64,
    pub method: WilcoxonMethod,
    /// Rank sum of the first sample (midranks, not doubled).
    pub rank_sum_x: f64,
}

/// Exact two-sided p-value with default options.
pub fn wilcoxon_exact(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    wilcoxon(x, y, &WilcoxonOptions::default()).map(|r| r.p_value)
}

/// Doubled pooled midranks (`x` first, then `y`).
pub fn rank_sum_doubled(x: &[f64], y: &[f64]) -> Vec<u64> {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|a, b| pooled[*a].total_cmp(&pooled[*b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..=j share the midrank ((i+1) + (j+1)) / 2.
        for &o in &order[i..=j] {
            ranks[o] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

pub fn wilcoxon(x: &[f64], y: &[f64], options: &WilcoxonOptions) -> Result<WilcoxonResult, StatsError> {
    if x.is_empty() {
        return Err(StatsError::EmptySample("x"));
    }
    if y.is_empty() {
        return Err(StatsError::EmptySample("y"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let ranks = rank_sum_doubled(x, y);
    let total = ranks.len();
    let rank_sum_x = ranks[..x.len()].iter().sum::<u64>() as f64 / 2.0;
    // Two-sided extremeness is the same for either sample; count subsets of
    // the smaller one.
    let (k, observed) = if x.len() <= y.len() {
        (x.len(), ranks[..x.len()].iter().sum::<u64>())
    } else {
        (y.len(), ranks[x.len()..].iter().sum::<u64>())
    };
    let expected = (k * (total + 1)) as u64;
    let dev = observed.abs_diff(expected);

    let (p_value, method) = if total <= options.enumeration_cap {
        (enumerate(&ranks, k, expected, dev, options.execution), WilcoxonMethod::Enumeration)
    } else if total <= options.exact_cap {
        (count_exact(&ranks, k, expected, dev), WilcoxonMethod::ExactCount)
    } else {
        match options.approximation {
            None => return Err(StatsError::SampleTooLarge { total, cap: options.exact_cap }),
            Some(Approximation::Normal) => (normal(&ranks, k, dev), WilcoxonMethod::Normal),
            Some(Approximation::MonteCarlo { draws, seed }) => (
                monte_carlo(&ranks, k, expected, dev, draws, seed, options.execution),
                WilcoxonMethod::MonteCarlo { draws, seed },
            ),
        }
    };
    Ok(WilcoxonResult { p_value: p_value.min(1.0), method, rank_sum_x })
}

/// Counts `k`-subsets of `ranks[start..]` whose sum (plus `acc`) is extreme.
fn count_from(ranks: &[u64], start: usize, left: usize, acc: u64, expected: u64, dev: u64) -> u64 {
    if left == 0 {
        return u64::from(acc.abs_diff(expected) >= dev);
    }
    (start..=ranks.len() - left).map(|i| count_from(ranks, i + 1, left - 1, acc + ranks[i], expected, dev)).sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn enumerate(ranks: &[u64], k: usize, expected: u64, dev: u64, execution: Execution) -> f64 {
    let n = ranks.len();
    let first = |i: usize| count_from(ranks, i + 1, k - 1, ranks[i], expected, dev);
    let extreme: u64 =
        if execution.is_parallel() { parallel_sum(n - k + 1, first) } else { (0..=n - k).map(first).sum() };
    extreme as f64 / binomial(n, k).round()
}

#[cfg(feature = "parallel")]
fn parallel_sum(len: usize, f: impl Fn(usize) -> u64 + Sync + Send) -> u64 {
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).sum()
}

#[cfg(not(feature = "parallel"))]
fn parallel_sum(len: usize, f: impl Fn(usize) -> u64) -> u64 {
    (0..len).map(f).sum()
}

/// Exact null distribution of the subset sum, counted by dynamic
/// programming over (subset size, doubled rank sum).
fn count_exact(ranks: &[u64], k: usize, expected: u64, dev: u64) -> f64 {
    let max_sum: u64 = {
        let mut sorted = ranks.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted[..k].iter().sum()
    };
    let width = max_sum as usize + 1;
    let mut dp = vec![0.0f64; (k + 1) * width];
    dp[0] = 1.0;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for size in (1..=k.min(seen + 1)).rev() {
            let (lower, upper) = dp.split_at_mut(size * width);
            let prev = &lower[(size - 1) * width..];
            let cur = &mut upper[..width];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let row = &dp[k * width..];
    let total: f64 = row.iter().sum();
    let extreme: f64 =
        row.iter().enumerate().filter(|(s, _)| (*s as u64).abs_diff(expected) >= dev).map(|(_, c)| c).sum();
    extreme / total
}

const MC_CHUNK: u64 = 10_000;

/// Permutation p-value `(hits + 1) / (draws + 1)`. Each chunk of draws has
/// its own ChaCha stream, so the result does not depend on thread count.
fn monte_carlo(ranks: &[u64], k: usize, expected: u64, dev: u64, draws: u64, seed: u64, execution: Execution) -> f64 {
    let chunks = draws.div_ceil(MC_CHUNK);
    let chunk = |c: usize| {
        let c = c as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        let mut pool = ranks.to_vec();
        let n = pool.len();
        let mut hits = 0u64;
        for _ in 0..MC_CHUNK.min(draws - c * MC_CHUNK) {
            let mut sum = 0;
            for i in 0..k {
                let j = rng.random_range(i..n);
                pool.swap(i, j);
                sum += pool[i];
            }
            hits += u64::from(sum.abs_diff(expected) >= dev);
        }
        hits
    };
    let hits = if execution.is_parallel() {
        parallel_sum(chunks as usize, chunk)
    } else {
        (0..chunks as usize).map(chunk).sum()
    };
    (hits + 1) as f64 / (draws + 1) as f64
}

/// Normal approximation with tie-corrected variance and continuity
/// correction.
fn normal(ranks: &[u64], k: usize, dev: u64) -> f64 {
    let n = ranks.len() as f64;
    let (k, m) = (k as f64, n - k as f64);
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let ties: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();
    let var = k * m / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    // `dev` is in doubled-rank units.
    let z = ((dev as f64 / 2.0) - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - std.cdf(z))).min(1.0)
}
