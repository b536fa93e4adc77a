//! Turns file-system activity under a project root into an ordered stream of
//! developer events.
//!
//! Raw notifications are debounced. A JUnit report is held until a coverage
//! report arrives within the pairing window (one run with coverage), the
//! window expires (a run without coverage), or another event has to be
//! emitted after it. Coverage reports are held the same way; one that never
//! finds a JUnit partner becomes a coverage-only run with no test cases.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use notify::{RecommendedWatcher, RecursiveMode, Watcher};
use walkdir::WalkDir;

use super::{
    artifact_kind, classify_change, mtime_ms, parse_coverage_file, parse_junit_xml, test_run_event, ArtifactKind,
    CoverageReport, FileSnapshot, GlobError, IngestConfig, LcovMode, Matchers, TestRunReport,
};
use crate::events::{DevEvent, EventKind, SourceChange, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum WatchError {
    #[error("cannot watch {path}: {reason}")]
    WatchUnavailable { path: PathBuf, reason: String },
    #[error(transparent)]
    Glob(#[from] GlobError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WatchItem {
    Event(DevEvent),
    /// A file that could not be ingested (malformed report, unreadable).
    Warning(String),
}

/// Running watcher. Dropping it stops the background thread.
pub struct WatchHandle {
    events: Receiver<WatchItem>,
    _watcher: RecommendedWatcher,
    _worker: JoinHandle<()>,
}

impl WatchHandle {
    pub fn events(&self) -> &Receiver<WatchItem> {
        &self.events
    }
}

/// Starts watching `root`. Existing source files are snapshotted without
/// producing events.
pub fn watch(root: &Path, config: &IngestConfig, session_id: &str) -> Result<WatchHandle, WatchError> {
    let unavailable = |reason: String| WatchError::WatchUnavailable { path: root.to_path_buf(), reason };
    let root = root.canonicalize().map_err(|e| unavailable(e.to_string()))?;
    if !root.is_dir() {
        return Err(unavailable("not a directory".into()));
    }
    let matchers = Matchers::new(config)?;
    let mut state = WatchState {
        root: root.clone(),
        config: config.clone(),
        matchers,
        session_id: session_id.to_string(),
        snapshots: BTreeMap::new(),
        report_hashes: BTreeMap::new(),
        held_runs: Vec::new(),
        held_coverage: Vec::new(),
        last_ts: Timestamp::MIN,
    };
    state.initial_scan();

    let (raw_tx, raw_rx) = crossbeam_channel::unbounded::<PathBuf>();
    let (out_tx, out_rx) = crossbeam_channel::unbounded();
    let mut watcher = notify::recommended_watcher(move |res: notify::Result<notify::Event>| {
        if let Ok(ev) = res {
            if matches!(ev.kind, notify::EventKind::Access(_)) {
                return;
            }
            for p in ev.paths {
                let _ = raw_tx.send(p);
            }
        }
    })
    .map_err(|e| unavailable(e.to_string()))?;
    watcher.watch(&root, RecursiveMode::Recursive).map_err(|e| unavailable(e.to_string()))?;
    let worker = std::thread::Builder::new()
        .name("questd-watch".into())
        .spawn(move || state.run(raw_rx, out_tx))
        .map_err(|e| unavailable(e.to_string()))?;
    Ok(WatchHandle { events: out_rx, _watcher: watcher, _worker: worker })
}

struct Held<T> {
    value: T,
    mtime: Timestamp,
    deadline: Instant,
}

struct WatchState {
    root: PathBuf,
    config: IngestConfig,
    matchers: Matchers,
    session_id: String,
    snapshots: BTreeMap<String, FileSnapshot>,
    report_hashes: BTreeMap<String, String>,
    held_runs: Vec<Held<TestRunReport>>,
    held_coverage: Vec<Held<CoverageReport>>,
    last_ts: Timestamp,
}

enum Pending {
    Ready(Timestamp, EventKind),
    Run(Timestamp, TestRunReport),
    Coverage(Timestamp, CoverageReport),
}

impl WatchState {
    fn rel(&self, path: &Path) -> Option<String> {
        let rel = path.strip_prefix(&self.root).ok()?;
        if rel
            .components()
            .any(|c| c.as_os_str().to_str().is_some_and(|s| self.config.ignore_dirs.iter().any(|d| d == s)))
        {
            return None;
        }
        Some(rel.to_string_lossy().replace('\\', "/"))
    }

    fn initial_scan(&mut self) {
        let ignore = self.config.ignore_dirs.clone();
        let walker = WalkDir::new(&self.root)
            .into_iter()
            .filter_entry(|e| e.depth() == 0 || !e.file_name().to_str().is_some_and(|n| ignore.iter().any(|d| d == n)));
        for entry in walker.filter_map(Result::ok).filter(|e| e.file_type().is_file()) {
            let Some(rel) = self.rel(entry.path()) else {
                continue;
            };
            let Ok(bytes) = std::fs::read(entry.path()) else {
                continue;
            };
            match artifact_kind(&rel, &self.config, &self.matchers) {
                ArtifactKind::Source => {
                    let snap = FileSnapshot::new(&rel, &bytes, &self.matchers.test_roots);
                    self.snapshots.insert(rel, snap);
                }
                ArtifactKind::JunitReport | ArtifactKind::CoverageReport => {
                    self.report_hashes.insert(rel, super::content_hash(&bytes));
                }
                ArtifactKind::Other => {}
            }
        }
    }

    fn run(mut self, raw: Receiver<PathBuf>, out: Sender<WatchItem>) {
        let debounce = Duration::from_millis(self.config.debounce_ms);
        let mut batch: BTreeSet<PathBuf> = BTreeSet::new();
        let mut batch_deadline: Option<Instant> = None;
        loop {
            let next_deadline = [batch_deadline, self.earliest_hold()].into_iter().flatten().min();
            let received = match next_deadline {
                Some(d) => raw.recv_timeout(d.saturating_duration_since(Instant::now())),
                None => raw.recv().map_err(|_| RecvTimeoutError::Disconnected),
            };
            match received {
                Ok(path) => {
                    batch.insert(path);
                    batch_deadline = Some(Instant::now() + debounce);
                    continue;
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let paths = std::mem::take(&mut batch);
                    let mut items = self.process(paths);
                    items.extend(self.flush_holds(None));
                    self.send(&out, items);
                    return;
                }
                Err(RecvTimeoutError::Timeout) => {}
            }
            let now = Instant::now();
            let mut items = Vec::new();
            if batch_deadline.is_some_and(|d| d <= now) {
                batch_deadline = None;
                items = self.process(std::mem::take(&mut batch));
            }
            items.extend(self.flush_holds(Some(now)));
            if !self.send(&out, items) {
                return;
            }
        }
    }

    fn send(&mut self, out: &Sender<WatchItem>, items: Vec<WatchItem>) -> bool {
        items.into_iter().all(|i| out.send(i).is_ok())
    }

    fn earliest_hold(&self) -> Option<Instant> {
        let runs = self.held_runs.iter().map(|h| h.deadline);
        let covs = self.held_coverage.iter().map(|h| h.deadline);
        runs.chain(covs).min()
    }

    fn process(&mut self, paths: BTreeSet<PathBuf>) -> Vec<WatchItem> {
        let mut items = Vec::new();
        let mut pending = Vec::new();
        for path in paths {
            let Some(rel) = self.rel(&path) else { continue };
            let kind = artifact_kind(&rel, &self.config, &self.matchers);
            if kind == ArtifactKind::Other {
                continue;
            }
            let meta = match std::fs::metadata(&path) {
                Ok(m) if m.is_file() => m,
                _ => {
                    // Deleted or not a file: forget it.
                    self.snapshots.remove(&rel);
                    self.report_hashes.remove(&rel);
                    continue;
                }
            };
            let mtime = mtime_ms(&meta).unwrap_or(self.last_ts);
            let bytes = match std::fs::read(&path) {
                Ok(b) => b,
                Err(e) => {
                    items.push(WatchItem::Warning(format!("{rel}: {e}")));
                    continue;
                }
            };
            match kind {
                ArtifactKind::Source => {
                    let facts = classify_change(self.snapshots.get(&rel), &bytes, &self.config.print_pattern);
                    let snap = FileSnapshot::new(&rel, &bytes, &self.matchers.test_roots);
                    let file_class = snap.file_class;
                    self.snapshots.insert(rel.clone(), snap);
                    if !facts.is_empty() {
                        pending.push(Pending::Ready(
                            mtime,
                            EventKind::SourceChanged(SourceChange { path: rel, file_class, change_facts: facts }),
                        ));
                    }
                }
                ArtifactKind::JunitReport | ArtifactKind::CoverageReport => {
                    let hash = super::content_hash(&bytes);
                    if self.report_hashes.get(&rel) == Some(&hash) {
                        continue;
                    }
                    self.report_hashes.insert(rel.clone(), hash);
                    if kind == ArtifactKind::JunitReport {
                        match parse_junit_xml(&bytes) {
                            Ok(mut r) => {
                                r.produced_at = Some(mtime);
                                pending.push(Pending::Run(mtime, r));
                            }
                            Err(e) => items.push(WatchItem::Warning(format!("{rel}: {e}"))),
                        }
                    } else {
                        match parse_coverage_file(&path, &bytes, LcovMode::Lenient) {
                            Ok(c) => pending.push(Pending::Coverage(mtime, c)),
                            Err(e) => items.push(WatchItem::Warning(format!("{rel}: {e}"))),
                        }
                    }
                }
                ArtifactKind::Other => {}
            }
        }
        pending.sort_by_key(|p| match p {
            Pending::Ready(t, _) | Pending::Run(t, _) | Pending::Coverage(t, _) => *t,
        });
        let window = Duration::from_millis(self.config.coverage_pair_window_ms);
        let window_ms = self.config.coverage_pair_window_ms as Timestamp;
        for p in pending {
            match p {
                Pending::Ready(ts, kind) => {
                    // Anything held from before this change is released first to keep order.
                    let mut released = self.flush_holds(None);
                    released.push(self.event(ts, kind));
                    items.extend(released);
                }
                Pending::Run(ts, report) => {
                    if let Some(i) = self.held_coverage.iter().position(|h| (h.mtime - ts).abs() <= window_ms) {
                        let cov = self.held_coverage.remove(i);
                        items.extend(self.flush_holds(None));
                        items.push(self.event(ts.max(cov.mtime), test_run_event(Some(report), Some(cov.value))));
                    } else {
                        items.extend(self.flush_holds(None));
                        self.held_runs.push(Held { value: report, mtime: ts, deadline: Instant::now() + window });
                    }
                }
                Pending::Coverage(ts, cov) => {
                    if let Some(i) = self.held_runs.iter().position(|h| (ts - h.mtime).abs() <= window_ms) {
                        let run = self.held_runs.remove(i);
                        items.extend(self.flush_holds(None));
                        items.push(self.event(ts.max(run.mtime), test_run_event(Some(run.value), Some(cov))));
                    } else {
                        items.extend(self.flush_holds(None));
                        self.held_coverage.push(Held { value: cov, mtime: ts, deadline: Instant::now() + window });
                    }
                }
            }
        }
        items
    }

    /// Emits held reports unpaired: all of them, or only those whose
    /// deadline passed when `now` is given.
    fn flush_holds(&mut self, now: Option<Instant>) -> Vec<WatchItem> {
        let due = |h_deadline: Instant| now.is_none_or(|n| h_deadline <= n);
        let mut out: Vec<(Timestamp, EventKind)> = Vec::new();
        let (runs, keep_runs): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.held_runs).into_iter().partition(|h| due(h.deadline));
        self.held_runs = keep_runs;
        out.extend(runs.into_iter().map(|h| (h.mtime, test_run_event(Some(h.value), None))));
        let (covs, keep_covs): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.held_coverage).into_iter().partition(|h| due(h.deadline));
        self.held_coverage = keep_covs;
        out.extend(covs.into_iter().map(|h| (h.mtime, test_run_event(None, Some(h.value)))));
        out.sort_by_key(|(t, _)| *t);
        out.into_iter().map(|(t, k)| self.event(t, k)).collect()
    }

    fn event(&mut self, ts: Timestamp, kind: EventKind) -> WatchItem {
        self.last_ts = self.last_ts.max(ts);
        WatchItem::Event(DevEvent::new(self.last_ts, self.session_id.clone(), kind))
    }
}
