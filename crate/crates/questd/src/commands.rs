//! One-shot commands. Each returns an [`Failure`] that `main` turns into an
//! exit code: 1 when the operation failed, 2 on a usage problem.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use questd_core::catalog::{catalog, catalog_json, AchievementDef, Boundaries, Category, Level};
use questd_core::engine::{
    import, read_log, read_store_log, recover, LogEntry, Notification, StateView, Store, StoreError, StoreOptions,
};
use questd_core::events::{DevEvent, Timestamp};
use questd_core::ingestion::{
    artifact_kind, parse_coverage_file, parse_junit_xml, test_run_event, ArtifactKind, CoverageReport, LcovMode,
    Matchers, TestRunReport,
};
use questd_core::stats::{group_report, write_csv, Approximation, Execution, ReportOptions};

use crate::config::Config;
use crate::daemon::{now_ms, state_json};

#[derive(Debug)]
pub enum Failure {
    /// Exit code 1.
    Operation(String),
    /// Exit code 2.
    Usage(String),
}

impl Failure {
    pub fn op(e: impl ToString) -> Failure {
        Failure::Operation(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Failure {
        match e {
            StoreError::Locked(dir) => Failure::Operation(format!(
                "state directory {} is in use by a running questd; stop it or use its HTTP API",
                dir.display()
            )),
            e => Failure::op(e),
        }
    }
}

pub type Outcome = Result<(), Failure>;

pub fn print_notifications(notes: &[Notification]) {
    for n in notes {
        println!("{n}");
    }
}

fn glyph(level: Level) -> char {
    match level {
        Level::None => '○',
        Level::Bronze => '◔',
        Level::Silver => '◑',
        Level::Gold => '◕',
        Level::Platinum => '●',
    }
}

fn category_name(c: Category) -> &'static str {
    match c {
        Category::Testing => "Testing",
        Category::Coverage => "Coverage",
        Category::Debugging => "Debugging",
        Category::TestRefactoring => "Test refactoring",
    }
}

fn pad(s: &str, width: usize) -> String {
    let n = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(n)))
}

pub fn render_status(view: &StateView) -> String {
    let width = view.achievements.iter().map(|a| a.title.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "  {}  {:<8}  {:>8}  {:<12}  NEXT", pad("ACHIEVEMENT", width), "LEVEL", "PROGRESS", "");
    for a in &view.achievements {
        let filled = (a.fraction * 10.0).floor() as usize;
        let bar = format!("[{}{}]", "#".repeat(filled), "-".repeat(10 - filled.min(10)));
        let _ = writeln!(
            out,
            "{} {}  {:<8}  {:>8}  {}  {}",
            glyph(a.level),
            pad(&a.title, width),
            a.level.name(),
            a.progress,
            bar,
            a.next_target_text.as_deref().unwrap_or("(complete)")
        );
    }
    out
}

fn boundaries_text(def: &AchievementDef) -> String {
    match &def.boundaries {
        Boundaries::Scalar(b) => b.map(|v| v.to_string()).join(" / "),
        Boundaries::Multi(tiers) => tiers
            .iter()
            .map(|t| {
                let mut s = format!("X:{}", t.x);
                if let Some(y) = t.y {
                    let _ = write!(s, " Y:{y}");
                }
                if let Some(z) = t.z {
                    let _ = write!(s, " Z:{z}");
                }
                s
            })
            .collect::<Vec<_>>()
            .join(" / "),
    }
}

pub fn achievements(json: bool) -> Outcome {
    if json {
        print!("{}", catalog_json());
        return Ok(());
    }
    let width = catalog().iter().map(|d| d.title.chars().count()).max().unwrap_or(0);
    let mut category = None;
    for def in catalog() {
        if category != Some(def.category) {
            category = Some(def.category);
            println!("{}", category_name(def.category));
        }
        println!("  {}  {:<40}  {}", pad(def.title, width), def.description, boundaries_text(def));
    }
    Ok(())
}

pub fn status(config: &Config, json: bool) -> Outcome {
    let (replay, _, recovery) = recover(&config.state_dir, config.engine())?;
    if let Some(reason) = recovery.fallback_reason {
        eprintln!("questd: state checkpoint unusable ({reason}); rebuilt from the event log");
    }
    let view = StateView::new(&replay.state);
    if json {
        print!("{}", state_json(&view));
    } else {
        print!("{}", render_status(&view));
    }
    Ok(())
}

pub fn reset(options: &StoreOptions, confirm: bool) -> Outcome {
    if !confirm {
        return Err(Failure::op("NotConfirmed: reset clears all progress; run again with --confirm"));
    }
    let (mut store, _) = Store::open(options)?;
    let ts = now_ms().max(store.state().last_event_ts.unwrap_or(Timestamp::MIN));
    store.reset(true, ts)?;
    store.close()?;
    println!("[RESET] all progress cleared");
    Ok(())
}

pub fn replay(options: &StoreOptions, log: &Path, quiet: bool) -> Outcome {
    let entries = read_log(log).map_err(Failure::op)?;
    let r = import(options, &entries)?;
    if !quiet {
        print_notifications(&r.notifications);
    }
    println!("replayed {} entries ({} events), digest {}", entries.len(), r.events_applied, r.state.digest());
    Ok(())
}

enum Report {
    Junit(TestRunReport),
    Coverage(CoverageReport),
}

fn sniff(path: &Path, bytes: &[u8], config: &Config, m: &Matchers) -> Option<ArtifactKind> {
    if let k @ (ArtifactKind::JunitReport | ArtifactKind::CoverageReport) =
        artifact_kind(&path.to_string_lossy(), &config.ingest, m)
    {
        return Some(k);
    }
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(4096)]);
    if head.contains("<testsuite") {
        Some(ArtifactKind::JunitReport)
    } else if head.contains("<report") || head.lines().any(|l| l.starts_with("SF:") || l.starts_with("TN:")) {
        Some(ArtifactKind::CoverageReport)
    } else {
        None
    }
}

fn read_report(path: &Path, config: &Config, m: &Matchers) -> Result<Report, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::op(format!("{}: {e}", path.display())))?;
    let malformed =
        |e: questd_core::ingestion::MalformedReport| Failure::op(format!("MalformedReport: {}: {e}", path.display()));
    match sniff(path, &bytes, config, m) {
        Some(ArtifactKind::JunitReport) => parse_junit_xml(&bytes).map(Report::Junit).map_err(malformed),
        Some(_) => parse_coverage_file(path, &bytes, LcovMode::Lenient).map(Report::Coverage).map_err(malformed),
        None => Err(Failure::op(format!("MalformedReport: {}: not a JUnit, JaCoCo or LCOV report", path.display()))),
    }
}

/// Ingests report files (the i-th JUnit report is paired with the i-th
/// coverage report) and/or the entries of a recorded log. Entries of the log
/// that are already at the start of the state log are skipped, so an
/// interrupted ingest can simply be run again.
pub fn ingest(
    config: &Config,
    options: &StoreOptions,
    paths: &[PathBuf],
    log: Option<&Path>,
    session: &str,
    ts: Option<Timestamp>,
) -> Outcome {
    if paths.is_empty() && log.is_none() {
        return Err(Failure::Usage("nothing to ingest: give report files and/or --log <file>".into()));
    }
    let m = Matchers::new(&config.ingest).map_err(Failure::op)?;
    let (mut junit, mut coverage) = (Vec::new(), Vec::new());
    for p in paths {
        match read_report(p, config, &m)? {
            Report::Junit(r) => junit.push(r),
            Report::Coverage(c) => coverage.push(c),
        }
    }
    let recorded = match log {
        Some(l) => read_log(l).map_err(Failure::op)?,
        None => Vec::new(),
    };

    let (mut store, recovery) = Store::open(options)?;
    if let Some(reason) = recovery.fallback_reason {
        eprintln!("questd: state checkpoint unusable ({reason}); rebuilt from the event log");
    }
    let present: Vec<LogEntry> =
        read_store_log(&options.state_dir)?.into_iter().filter(|e| !matches!(e, LogEntry::Snapshot { .. })).collect();
    let fresh: Vec<&LogEntry> = recorded.iter().filter(|e| !matches!(e, LogEntry::Snapshot { .. })).collect();
    let skip = if present.len() <= fresh.len() && present.iter().zip(&fresh).all(|(a, b)| a == *b) {
        present.len()
    } else {
        0
    };
    for entry in &fresh[skip..] {
        print_notifications(&store.submit_entry(entry)?);
    }

    let ts = ts.unwrap_or_else(now_ms).max(store.state().last_event_ts.unwrap_or(Timestamp::MIN));
    let runs = junit.len().max(coverage.len());
    let mut junit = junit.into_iter();
    let mut coverage = coverage.into_iter();
    for _ in 0..runs {
        let kind = test_run_event(junit.next(), coverage.next());
        print_notifications(&store.submit(DevEvent::new(ts, session, kind))?);
    }
    store.close()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ApproximationArg {
    Normal,
    MonteCarlo,
}

pub struct StatsArgs<'a> {
    pub groups: &'a Path,
    pub logs: Option<&'a Path>,
    pub out: &'a Path,
    pub csv: Option<&'a Path>,
    pub approximation: Option<ApproximationArg>,
    pub seed: u64,
    pub sequential: bool,
}

pub fn stats(config: &Config, args: &StatsArgs) -> Outcome {
    let text =
        std::fs::read_to_string(args.groups).map_err(|e| Failure::op(format!("{}: {e}", args.groups.display())))?;
    let raw: BTreeMap<String, Vec<PathBuf>> =
        serde_json::from_str(&text).map_err(|e| Failure::op(format!("{}: {e}", args.groups.display())))?;
    let base =
        args.logs.map(Path::to_path_buf).unwrap_or_else(|| args.groups.parent().unwrap_or(Path::new(".")).into());
    let groups = raw.into_iter().map(|(g, paths)| (g, paths.into_iter().map(|p| base.join(p)).collect())).collect();
    let mut options = ReportOptions { engine: config.engine(), ..ReportOptions::default() };
    options.wilcoxon.approximation = args.approximation.map(|a| match a {
        ApproximationArg::Normal => Approximation::Normal,
        ApproximationArg::MonteCarlo => Approximation::monte_carlo(args.seed),
    });
    if args.sequential {
        options.execution = Execution::Sequential;
        options.wilcoxon.execution = Execution::Sequential;
    }
    let report = group_report(&groups, &options);
    let mut json = serde_json::to_string_pretty(&report).map_err(Failure::op)?;
    json.push('\n');
    std::fs::write(args.out, json).map_err(|e| Failure::op(format!("{}: {e}", args.out.display())))?;
    if let Some(dir) = args.csv {
        std::fs::create_dir_all(dir).map_err(|e| Failure::op(format!("{}: {e}", dir.display())))?;
        write_csv(&report, dir).map_err(Failure::op)?;
    }
    for g in &report.groups {
        for s in &g.skipped {
            eprintln!("questd: group {}: skipped {s}", g.name);
        }
        if g.empty {
            eprintln!("questd: group {} has no usable logs and is excluded from comparisons", g.name);
        }
    }
    for t in &report.pairwise {
        let p = t.p_value.map_or_else(|| "n/a".to_string(), |p| p.to_string());
        println!("{} vs {}  {:<16} {:<8} p = {p}", t.group_a, t.group_b, t.metric, t.test);
    }
    Ok(())
}
