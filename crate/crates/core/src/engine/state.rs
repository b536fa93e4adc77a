use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::log::LogEntry;
use super::notify::{Notification, NotificationKind};
use crate::catalog::{
    catalog, display_progress, level_for, lookup, next_target_text, AchievementDef, AchievementId, Boundaries, Level,
    Progress,
};
use crate::events::{simple_increments, DetectorState, DevEvent, EventKind, Increment, InvalidEvent, Timestamp};
use crate::ingestion::ClassCoverage;

pub const DEFAULT_IDLE_MS: i64 = 30 * 60 * 1000;
pub const EXPERIMENT_IDLE_MS: i64 = 5 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    /// Time without progress after which an encouragement is shown.
    pub idle_ms: i64,
    /// A snapshot line is written to the log after this many events.
    pub snapshot_every: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { idle_ms: DEFAULT_IDLE_MS, snapshot_every: 60 }
    }
}

impl EngineConfig {
    /// Experiment mode forces the five-minute idle threshold.
    pub fn with_idle(idle_minutes: u64, experiment_mode: bool) -> EngineConfig {
        let idle_ms = if experiment_mode { EXPERIMENT_IDLE_MS } else { idle_minutes as i64 * 60_000 };
        EngineConfig { idle_ms, ..EngineConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("event at {ts} is earlier than the last applied event at {last}")]
    OutOfOrderEvent { ts: Timestamp, last: Timestamp },
    #[error("invalid event: {0}")]
    InvalidEvent(#[from] InvalidEvent),
    #[error("reset needs explicit confirmation")]
    NotConfirmed,
    #[error("snapshot after {events} events does not match: log has {logged}, replay has {actual}")]
    SnapshotMismatch { events: u64, logged: String, actual: String },
}

const CLASS_REVIEWERS: [AchievementId; 3] =
    [AchievementId::ClassReviewerLines, AchievementId::ClassReviewerMethods, AchievementId::ClassReviewerBranches];

fn reviewed_entities(a: AchievementId, c: &ClassCoverage) -> (u64, u64) {
    match a {
        AchievementId::ClassReviewerLines => (c.lines_covered, c.lines_total),
        AchievementId::ClassReviewerMethods => (c.methods_covered, c.methods_total),
        _ => (c.branches_covered, c.branches_total),
    }
}

/// Everything the engine knows. Serialized with sorted maps, so equal
/// states serialize to equal bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineState {
    pub progress: BTreeMap<AchievementId, Progress>,
    pub awarded: BTreeMap<AchievementId, Level>,
    pub detector: DetectorState,
    /// Distinct classes that met each level's `(Y, Z)` requirement.
    pub reviewed_classes: BTreeMap<AchievementId, [BTreeSet<String>; 4]>,
    /// Highest quartile announced in the current level interval.
    pub notified_quartiles: BTreeMap<AchievementId, u8>,
    pub installed_at: Option<Timestamp>,
    pub last_event_ts: Option<Timestamp>,
    pub last_progress_ts: Option<Timestamp>,
    pub last_encouragement_ts: Option<Timestamp>,
    pub welcomed: bool,
    pub suggestion_cursor: u64,
}

impl Default for EngineState {
    fn default() -> Self {
        EngineState::new()
    }
}

impl EngineState {
    pub fn new() -> EngineState {
        EngineState {
            progress: catalog().iter().map(|d| (d.id, Progress::zero_for(&d.boundaries))).collect(),
            awarded: catalog().iter().map(|d| (d.id, Level::None)).collect(),
            detector: DetectorState::default(),
            reviewed_classes: CLASS_REVIEWERS.iter().map(|a| (*a, Default::default())).collect(),
            notified_quartiles: catalog().iter().map(|d| (d.id, 0)).collect(),
            installed_at: None,
            last_event_ts: None,
            last_progress_ts: None,
            last_encouragement_ts: None,
            welcomed: false,
            suggestion_cursor: 0,
        }
    }

    pub fn progress(&self, a: AchievementId) -> Progress {
        self.progress.get(&a).copied().unwrap_or_else(|| Progress::zero_for(&lookup(a).boundaries))
    }

    pub fn level(&self, a: AchievementId) -> Level {
        self.awarded.get(&a).copied().unwrap_or_default()
    }

    /// Display value (see [`display_progress`]).
    pub fn value(&self, a: AchievementId) -> u64 {
        display_progress(lookup(a), &self.progress(a))
    }

    /// Compact JSON used for digests and equality across processes.
    pub fn canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("engine state serializes")
    }

    /// Hex SHA-256 of [`EngineState::canonical_json`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json()))
    }

    /// Rejects events that `apply` would reject, without changing anything.
    pub fn check(&self, event: &DevEvent) -> Result<(), EngineError> {
        event.validate()?;
        match self.last_event_ts {
            Some(last) if event.ts < last => Err(EngineError::OutOfOrderEvent { ts: event.ts, last }),
            _ => Ok(()),
        }
    }

    /// Applies one event and returns the notifications it causes, in
    /// catalog order with level-ups before progress for each achievement.
    pub fn apply(&mut self, event: &DevEvent) -> Result<Vec<Notification>, EngineError> {
        self.check(event)?;
        self.installed_at.get_or_insert(event.ts);
        self.last_event_ts = Some(event.ts);

        let before = self.progress.clone();
        let mut increments = simple_increments(event);
        increments.extend(self.detector.step(event));
        for inc in &increments {
            let slot = self
                .progress
                .entry(inc.achievement())
                .or_insert_with(|| Progress::zero_for(&lookup(inc.achievement()).boundaries));
            match (inc, slot) {
                (Increment::Count { amount, .. }, Progress::Scalar(v)) => *v = v.saturating_add(*amount),
                (Increment::Tiers { tiers, .. }, Progress::Counters(c)) => {
                    for (c, t) in c.iter_mut().zip(tiers) {
                        *c = c.saturating_add(*t);
                    }
                }
                _ => {}
            }
        }
        if let EventKind::TestRunFinished(run) = &event.kind {
            if let Some(cov) = &run.coverage {
                self.review_classes(&cov.per_class);
            }
        }

        let mut out = Vec::new();
        for def in catalog() {
            let (old, new) = (before[&def.id], self.progress[&def.id]);
            if old != new {
                self.notify(def, &old, &new, event.ts, &mut out);
            }
        }
        if before != self.progress {
            self.last_progress_ts = Some(event.ts);
        }
        Ok(out)
    }

    fn review_classes(&mut self, classes: &[ClassCoverage]) {
        for a in CLASS_REVIEWERS {
            let Boundaries::Multi(tiers) = lookup(a).boundaries else {
                continue;
            };
            let sets = self.reviewed_classes.entry(a).or_default();
            for class in classes {
                let (covered, total) = reviewed_entities(a, class);
                for (tier, set) in tiers.iter().zip(sets.iter_mut()) {
                    let (y, z) = (tier.y.unwrap_or(0), tier.z.unwrap_or(0));
                    let meets =
                        total >= y && total > 0 && u128::from(covered) * 100 >= u128::from(z) * u128::from(total);
                    if meets && !set.contains(&class.class_name) {
                        set.insert(class.class_name.clone());
                    }
                }
            }
            let counts = sets.each_ref().map(|s| s.len() as u64);
            self.progress.insert(a, Progress::Counters(counts));
        }
    }

    fn notify(
        &mut self,
        def: &AchievementDef,
        old: &Progress,
        new: &Progress,
        ts: Timestamp,
        out: &mut Vec<Notification>,
    ) {
        let (l0, l1) = (level_for(def, old), level_for(def, new));
        self.awarded.insert(def.id, l1);
        for rank in l0.rank()..l1.rank() {
            let level = Level::from_tier(rank as usize);
            let progress = match new {
                Progress::Scalar(v) => *v,
                Progress::Counters(c) => c[rank as usize],
            };
            out.push(Notification { ts, kind: NotificationKind::LevelUp { achievement: def.id, level, progress } });
        }
        if l1 > l0 {
            self.notified_quartiles.insert(def.id, 0);
        }
        let Some(next_level) = l1.next() else { return };
        let q = quartile(def, new);
        let seen = self.notified_quartiles.entry(def.id).or_insert(0);
        if q > *seen {
            *seen = q;
            out.push(Notification {
                ts,
                kind: NotificationKind::Progress {
                    achievement: def.id,
                    next_level,
                    quartile: q,
                    fraction: f64::from(q) / 4.0,
                    progress: display_progress(def, new),
                },
            });
        }
    }

    /// Advances the idle timer. Returns the welcome encouragement on the
    /// first tick of a fresh state and one more each time `idle_ms` passes
    /// without progress or encouragement.
    pub fn tick(&mut self, now: Timestamp, config: &EngineConfig) -> Option<Notification> {
        let installed = *self.installed_at.get_or_insert(now);
        let due = if !self.welcomed {
            true
        } else {
            let since = self.last_progress_ts.unwrap_or(installed).max(self.last_encouragement_ts.unwrap_or(i64::MIN));
            now.saturating_sub(since) >= config.idle_ms
        };
        if !due {
            return None;
        }
        let (achievement, text) = self.suggestion()?;
        self.welcomed = true;
        self.last_encouragement_ts = Some(now);
        self.suggestion_cursor += 1;
        Some(Notification { ts: now, kind: NotificationKind::Encouragement { achievement, text } })
    }

    /// Round-robin over the achievements still at level None, lowest
    /// progress first; if all have a level, over those below platinum.
    fn suggestion(&self) -> Option<(AchievementId, String)> {
        let pick = |pred: &dyn Fn(Level) -> bool| {
            let mut c: Vec<_> = catalog().iter().filter(|d| pred(self.level(d.id))).collect();
            c.sort_by_key(|d| (self.value(d.id), d.id));
            c
        };
        let mut candidates = pick(&|l| l == Level::None);
        if candidates.is_empty() {
            candidates = pick(&|l| l != Level::Platinum);
        }
        if candidates.is_empty() {
            return None;
        }
        let def = candidates[(self.suggestion_cursor % candidates.len() as u64) as usize];
        Some((def.id, next_target_text(def, &self.progress(def.id))?))
    }

    /// Clears all progress. The install time and welcome flag survive, and
    /// the event ordering starts over.
    pub fn reset(&mut self, confirm: bool) -> Result<(), EngineError> {
        if !confirm {
            return Err(EngineError::NotConfirmed);
        }
        *self = EngineState {
            installed_at: self.installed_at,
            last_progress_ts: self.installed_at,
            welcomed: self.welcomed,
            ..EngineState::new()
        };
        Ok(())
    }
}

/// Quartile of the current level interval reached by `p`, capped at 3.
/// Multi-parameter achievements use the next level's counter against its `X`.
fn quartile(def: &AchievementDef, p: &Progress) -> u8 {
    let level = level_for(def, p);
    let Some(next) = level.next() else { return 0 };
    let (num, den) = match (&def.boundaries, p) {
        (Boundaries::Scalar(b), Progress::Scalar(v)) => {
            let floor = level.tier().map_or(0, |t| b[t]);
            let next = b[next.tier().unwrap_or(3)];
            (u128::from(v - floor), u128::from(next - floor))
        }
        (Boundaries::Multi(t), Progress::Counters(c)) => {
            let n = next.tier().unwrap_or(3);
            (u128::from(c[n]), u128::from(t[n].x))
        }
        _ => return 0,
    };
    if den == 0 {
        return 0;
    }
    (num * 4 / den).min(3) as u8
}

/// Result of folding a log.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub state: EngineState,
    pub notifications: Vec<Notification>,
    /// Events applied so far, counted across resets.
    pub events_applied: u64,
    pub config: EngineConfig,
}

impl Replay {
    pub fn new(config: EngineConfig) -> Replay {
        Replay::resume(EngineState::new(), 0, config)
    }

    pub fn resume(state: EngineState, events_applied: u64, config: EngineConfig) -> Replay {
        Replay { state, notifications: Vec::new(), events_applied, config }
    }

    /// Processes one log entry: an event is preceded by a tick at its own
    /// timestamp; snapshots are compared against the current state.
    pub fn process(&mut self, entry: &LogEntry) -> Result<Vec<Notification>, EngineError> {
        let mut out = Vec::new();
        match entry {
            LogEntry::Event(e) => {
                self.state.check(e)?;
                out.extend(self.state.tick(e.ts, &self.config));
                out.extend(self.state.apply(e)?);
                self.events_applied += 1;
            }
            LogEntry::Tick { ts } => out.extend(self.state.tick(*ts, &self.config)),
            LogEntry::Reset { .. } => self.state.reset(true)?,
            LogEntry::Snapshot { events_applied, digest, .. } => {
                let actual = self.state.digest();
                if *events_applied != self.events_applied || *digest != actual {
                    return Err(EngineError::SnapshotMismatch {
                        events: *events_applied,
                        logged: digest.clone(),
                        actual,
                    });
                }
            }
        }
        self.notifications.extend(out.iter().cloned());
        Ok(out)
    }
}

pub fn replay_entries<'a>(
    entries: impl IntoIterator<Item = &'a LogEntry>,
    config: EngineConfig,
) -> Result<Replay, EngineError> {
    let mut r = Replay::new(config);
    for e in entries {
        r.process(e)?;
    }
    Ok(r)
}

/// Replays a log from the empty state.
pub fn replay(entries: &[LogEntry], config: EngineConfig) -> Result<Replay, EngineError> {
    replay_entries(entries, config)
}
