//! Group comparison over recorded event logs: every log is replayed, a few
//! behavioural metrics are read off the resulting states (overall and per
//! minute), and groups are compared pairwise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ci_mean, fisher_exact_2x2, wilcoxon, Execution, StatsError, Table2x2, WilcoxonMethod, WilcoxonOptions};
use crate::catalog::AchievementId;
use crate::engine::{read_log, EngineConfig, EngineState, LogEntry, Replay};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    TestsWritten,
    TestRuns,
    TestsExecuted,
    CoverageRuns,
    DebugRuns,
    LevelsReached,
}

pub const METRICS: [MetricName; 6] = [
    MetricName::TestsWritten,
    MetricName::TestRuns,
    MetricName::TestsExecuted,
    MetricName::CoverageRuns,
    MetricName::DebugRuns,
    MetricName::LevelsReached,
];

impl MetricName {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::TestsWritten => "tests_written",
            MetricName::TestRuns => "test_runs",
            MetricName::TestsExecuted => "tests_executed",
            MetricName::CoverageRuns => "coverage_runs",
            MetricName::DebugRuns => "debug_runs",
            MetricName::LevelsReached => "levels_reached",
        }
    }

    fn read(self, s: &EngineState) -> u64 {
        match self {
            MetricName::TestsWritten => s.value(AchievementId::SafetyFirst),
            MetricName::TestRuns => s.value(AchievementId::TheTester),
            MetricName::TestsExecuted => s.value(AchievementId::TestExecutor),
            MetricName::CoverageRuns => s.value(AchievementId::GottaCatchEmAll),
            MetricName::DebugRuns => s.value(AchievementId::TheDebugger),
            MetricName::LevelsReached => s.awarded.values().map(|l| u64::from(l.rank())).sum(),
        }
    }
}

fn metrics_of(s: &EngineState) -> BTreeMap<MetricName, u64> {
    METRICS.iter().map(|m| (*m, m.read(s))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub engine: EngineConfig,
    pub wilcoxon: WilcoxonOptions,
    pub ci_level: f64,
    pub execution: Execution,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            engine: EngineConfig::default(),
            wilcoxon: WilcoxonOptions::default(),
            ci_level: 0.846,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMetrics {
    pub id: String,
    pub group: String,
    pub minutes: usize,
    pub totals: BTreeMap<MetricName, u64>,
    /// Value at the end of each minute since the first event.
    pub series: BTreeMap<MetricName, Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub name: String,
    pub participants: Vec<String>,
    /// Logs that could not be replayed, with the reason.
    pub skipped: Vec<String>,
    /// No usable participant; excluded from pairwise tests.
    pub empty: bool,
    pub means: BTreeMap<MetricName, f64>,
    /// Per-minute confidence bands; `None` where fewer than two
    /// participants have data.
    pub bands: BTreeMap<MetricName, Vec<Option<Band>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub group_a: String,
    pub group_b: String,
    /// A metric name, or `wrote_tests` for the Fisher test on whether a
    /// participant wrote any test.
    pub metric: String,
    pub test: String,
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub method: Option<WilcoxonMethod>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub version: u32,
    pub ci_level: f64,
    pub groups: Vec<GroupSummary>,
    pub participants: Vec<ParticipantMetrics>,
    pub pairwise: Vec<PairwiseTest>,
}

/// Rounds to `digits` significant digits.
pub fn round_sig(v: f64, digits: i32) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let scale = 10f64.powi(digits - 1 - v.abs().log10().floor() as i32);
    (v * scale).round() / scale
}

fn participant(group: &str, path: &Path, config: EngineConfig) -> Result<ParticipantMetrics, String> {
    let entries = read_log(path).map_err(|e| e.to_string())?;
    let id = path.display().to_string();
    replay_series(group, id, &entries, config)
}

fn replay_series(
    group: &str,
    id: String,
    entries: &[LogEntry],
    config: EngineConfig,
) -> Result<ParticipantMetrics, String> {
    const MINUTE: i64 = 60_000;
    let mut replay = Replay::new(config);
    let mut rows: Vec<BTreeMap<MetricName, u64>> = Vec::new();
    let start = entries.iter().find_map(|e| match e {
        LogEntry::Event(ev) => Some(ev.ts),
        _ => None,
    });
    for entry in entries {
        if let (Some(start), LogEntry::Event(ev)) = (start, entry) {
            while ev.ts >= start + (rows.len() as i64 + 1) * MINUTE {
                rows.push(metrics_of(&replay.state));
            }
        }
        replay.process(entry).map_err(|e| e.to_string())?;
        replay.notifications.clear();
    }
    let totals = metrics_of(&replay.state);
    if start.is_some() {
        rows.push(totals.clone());
    }
    let series = METRICS.iter().map(|m| (*m, rows.iter().map(|r| r[m]).collect())).collect();
    Ok(ParticipantMetrics { id, group: group.to_string(), minutes: rows.len(), totals, series })
}

fn map_jobs<T: Send, R: Send>(jobs: Vec<T>, execution: Execution, f: impl Fn(T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    if execution.is_parallel() {
        use rayon::prelude::*;
        return jobs.into_par_iter().map(f).collect();
    }
    let _ = execution;
    jobs.into_iter().map(f).collect()
}

/// Replays every log of every group and compares the groups.
pub fn group_report(groups: &BTreeMap<String, Vec<PathBuf>>, options: &ReportOptions) -> GroupReport {
    let jobs: Vec<(String, PathBuf)> =
        groups.iter().flat_map(|(g, paths)| paths.iter().map(move |p| (g.clone(), p.clone()))).collect();
    let config = options.engine;
    let results = map_jobs(jobs, options.execution, |(g, p)| {
        let r = participant(&g, &p, config);
        (g, p, r)
    });
    let mut participants = Vec::new();
    let mut skipped: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (g, p, r) in results {
        match r {
            Ok(m) => participants.push(m),
            Err(e) => skipped.entry(g).or_default().push(format!("{}: {e}", p.display())),
        }
    }
    participants.sort_by(|a, b| (&a.group, &a.id).cmp(&(&b.group, &b.id)));
    build_report(groups.keys().cloned().collect(), participants, skipped, options)
}

fn build_report(
    names: Vec<String>,
    participants: Vec<ParticipantMetrics>,
    mut skipped: BTreeMap<String, Vec<String>>,
    options: &ReportOptions,
) -> GroupReport {
    fn members<'a>(all: &'a [ParticipantMetrics], g: &'a str) -> impl Iterator<Item = &'a ParticipantMetrics> + 'a {
        all.iter().filter(move |p| p.group == g)
    }
    let mut groups = Vec::new();
    for name in &names {
        let ms: Vec<&ParticipantMetrics> = members(&participants, name).collect();
        let minutes = ms.iter().map(|m| m.minutes).max().unwrap_or(0);
        let mut means = BTreeMap::new();
        let mut bands = BTreeMap::new();
        for metric in METRICS {
            if !ms.is_empty() {
                let total: u64 = ms.iter().map(|m| m.totals[&metric]).sum();
                means.insert(metric, total as f64 / ms.len() as f64);
            }
            let per_minute = (0..minutes)
                .map(|t| {
                    // A finished session keeps its last value.
                    let vals: Vec<f64> = ms
                        .iter()
                        .filter_map(|m| {
                            let s = &m.series[&metric];
                            s.get(t).or(s.last()).map(|v| *v as f64)
                        })
                        .collect();
                    let (lo, hi) = ci_mean(&vals, options.ci_level).ok()?;
                    Some(Band { mean: (lo + hi) / 2.0, lo, hi })
                })
                .collect();
            bands.insert(metric, per_minute);
        }
        groups.push(GroupSummary {
            name: name.clone(),
            participants: ms.iter().map(|m| m.id.clone()).collect(),
            skipped: skipped.remove(name).unwrap_or_default(),
            empty: ms.is_empty(),
            means,
            bands,
        });
    }

    let mut pairwise = Vec::new();
    let usable: Vec<&GroupSummary> = groups.iter().filter(|g| !g.empty).collect();
    for (i, a) in usable.iter().enumerate() {
        for b in &usable[i + 1..] {
            let values = |g: &str, m: MetricName| -> Vec<f64> {
                members(&participants, g).map(|p| p.totals[&m] as f64).collect()
            };
            for metric in METRICS {
                let (x, y) = (values(&a.name, metric), values(&b.name, metric));
                let (p_value, method, note) = match wilcoxon(&x, &y, &options.wilcoxon) {
                    Ok(r) => (Some(round_sig(r.p_value, 4)), Some(r.method), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                pairwise.push(PairwiseTest {
                    group_a: a.name.clone(),
                    group_b: b.name.clone(),
                    metric: metric.as_str().to_string(),
                    test: "wilcoxon".into(),
                    p_value,
                    method,
                    note,
                });
            }
            let row = |g: &str| {
                let wrote =
                    members(&participants, g).filter(|p| p.totals[&MetricName::TestsWritten] > 0).count() as u64;
                [wrote, members(&participants, g).count() as u64 - wrote]
            };
            let (p_value, note) = match fisher_exact_2x2(Table2x2::new([row(&a.name), row(&b.name)])) {
                Ok(r) => (Some(round_sig(r.p_value, 4)), r.degenerate.then(|| "degenerate table".to_string())),
                Err(e) => (None, Some(StatsError::to_string(&e))),
            };
            pairwise.push(PairwiseTest {
                group_a: a.name.clone(),
                group_b: b.name.clone(),
                metric: "wrote_tests".into(),
                test: "fisher".into(),
                p_value,
                method: None,
                note,
            });
        }
    }
    GroupReport { version: 1, ci_level: options.ci_level, groups, participants, pairwise }
}

/// Writes `series.csv` (one row per participant and minute) and
/// `bands.csv` (one row per group, metric and minute) into `dir`.
pub fn write_csv(report: &GroupReport, dir: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(dir.join("series.csv"))?;
    let mut header = vec!["group".to_string(), "participant".into(), "minute".into()];
    header.extend(METRICS.iter().map(|m| m.as_str().to_string()));
    w.write_record(&header)?;
    for p in &report.participants {
        for t in 0..p.minutes {
            let mut rec = vec![p.group.clone(), p.id.clone(), t.to_string()];
            rec.extend(METRICS.iter().map(|m| p.series[m][t].to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("bands.csv"))?;
    w.write_record(["group", "metric", "minute", "mean", "lo", "hi"])?;
    for g in &report.groups {
        for (metric, bands) in &g.bands {
            for (t, band) in bands.iter().enumerate() {
                if let Some(b) = band {
                    w.write_record([
                        g.name.clone(),
                        metric.as_str().to_string(),
                        t.to_string(),
                        b.mean.to_string(),
                        b.lo.to_string(),
                        b.hi.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
