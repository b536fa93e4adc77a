//! The persisted engine: `<state_dir>/events.ndjson` is the source of truth,
//! `<state_dir>/state.json` a checkpoint of the state after a given number of
//! log entries.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::log::{EventLog, LogEntry, LogError};
use super::notify::Notification;
use super::state::{EngineConfig, EngineError, EngineState, Replay};
use crate::events::{DevEvent, Timestamp};

pub const STATE_VERSION: u32 = 1;
const STATE_FILE: &str = "state.json";
const LOG_FILE: &str = "events.ndjson";
const LOCK_FILE: &str = "lock";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("corrupt state file: {0}")]
    CorruptState(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("state directory {0} is in use by another questd process")]
    Locked(PathBuf),
}

#[derive(Serialize, Deserialize)]
struct StateFile<S> {
    version: u32,
    log_entries: u64,
    events_applied: u64,
    digest: String,
    state: S,
}

/// A checkpoint as read back from `state.json`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub state: EngineState,
    pub log_entries: u64,
    pub events_applied: u64,
}

pub fn save_state(state: &EngineState, log_entries: u64, events_applied: u64) -> Vec<u8> {
    let file = StateFile { version: STATE_VERSION, log_entries, events_applied, digest: state.digest(), state };
    let mut out = serde_json::to_vec_pretty(&file).expect("state serializes");
    out.push(b'\n');
    out
}

/// Parses a checkpoint, checking the version and the digest.
pub fn load_state(bytes: &[u8]) -> Result<Checkpoint, StoreError> {
    let corrupt = |m: String| StoreError::CorruptState(m);
    let file: StateFile<serde_json::Value> = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
    if file.version != STATE_VERSION {
        return Err(corrupt(format!("unknown version {}", file.version)));
    }
    let state: EngineState = serde_json::from_value(file.state).map_err(|e| corrupt(e.to_string()))?;
    if state.digest() != file.digest {
        return Err(corrupt("digest mismatch".into()));
    }
    Ok(Checkpoint { state, log_entries: file.log_entries, events_applied: file.events_applied })
}

#[derive(Debug, Clone)]
pub struct StoreOptions {
    pub state_dir: PathBuf,
    pub engine: EngineConfig,
    /// Abort the process right after the n-th event append of this process,
    /// before the state is saved. Used by crash tests.
    pub crash_after_append: Option<u64>,
}

impl StoreOptions {
    pub fn new(state_dir: impl Into<PathBuf>) -> StoreOptions {
        StoreOptions { state_dir: state_dir.into(), engine: EngineConfig::default(), crash_after_append: None }
    }
}

/// How a store came up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovery {
    /// The checkpoint was unusable and the whole log was replayed.
    pub fallback_reason: Option<String>,
    /// Log entries applied on top of the checkpoint.
    pub replayed: u64,
}

/// Recovers the current state without taking the lock or writing anything.
pub fn recover(state_dir: &Path, config: EngineConfig) -> Result<(Replay, u64, Recovery), StoreError> {
    let entries = read_store_log(state_dir)?;
    recover_from(state_dir, &entries, config)
}

fn recover_from(
    state_dir: &Path,
    entries: &[LogEntry],
    config: EngineConfig,
) -> Result<(Replay, u64, Recovery), StoreError> {
    let state_path = state_dir.join(STATE_FILE);
    let checkpoint = match std::fs::read(&state_path) {
        Ok(bytes) => load_state(&bytes).and_then(|c| {
            if c.log_entries as usize > entries.len() {
                Err(StoreError::CorruptState("checkpoint is ahead of the event log".into()))
            } else {
                Ok(c)
            }
        }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::CorruptState(String::new())),
        Err(e) => Err(StoreError::Io { path: state_path, source: e }),
    };
    let (mut replay, start, fallback_reason) = match checkpoint {
        Ok(c) => (Replay::resume(c.state, c.events_applied, config), c.log_entries as usize, None),
        Err(StoreError::CorruptState(reason)) => {
            let reason = (!reason.is_empty()).then_some(reason);
            (Replay::new(config), 0, reason)
        }
        Err(e) => return Err(e),
    };
    for entry in &entries[start..] {
        replay.process(entry)?;
    }
    let recovery = Recovery { fallback_reason, replayed: (entries.len() - start) as u64 };
    Ok((replay, entries.len() as u64, recovery))
}

/// Single writer over a state directory. Every accepted entry is appended
/// to the log before it is applied; the checkpoint is rewritten after.
#[derive(Debug)]
pub struct Store {
    replay: Replay,
    log: EventLog,
    state_dir: PathBuf,
    crash_after_append: Option<u64>,
    appends: u64,
    _lock: File,
}

impl Store {
    pub fn open(options: &StoreOptions) -> Result<(Store, Recovery), StoreError> {
        let dir = &options.state_dir;
        std::fs::create_dir_all(dir).map_err(|source| StoreError::Io { path: dir.clone(), source })?;
        let lock_path = dir.join(LOCK_FILE);
        let lock = File::create(&lock_path).map_err(|source| StoreError::Io { path: lock_path.clone(), source })?;
        if lock.try_lock().is_err() {
            return Err(StoreError::Locked(dir.clone()));
        }
        let (log, entries) = EventLog::open(&dir.join(LOG_FILE))?;
        let (mut replay, _, recovery) = recover_from(dir, &entries, options.engine)?;
        replay.notifications.clear();
        let store = Store {
            replay,
            log,
            state_dir: dir.clone(),
            crash_after_append: options.crash_after_append,
            appends: 0,
            _lock: lock,
        };
        store.save()?;
        Ok((store, recovery))
    }

    pub fn state(&self) -> &EngineState {
        &self.replay.state
    }

    pub fn events_applied(&self) -> u64 {
        self.replay.events_applied
    }

    pub fn log_entries(&self) -> u64 {
        self.log.len()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.replay.config
    }

    pub fn state_dir(&self) -> &Path {
        &self.state_dir
    }

    /// Validates, logs, applies and checkpoints one event.
    pub fn submit(&mut self, event: DevEvent) -> Result<Vec<Notification>, StoreError> {
        self.replay.state.check(&event)?;
        let entry = LogEntry::Event(event);
        self.log.append(&entry)?;
        self.appends += 1;
        if self.crash_after_append == Some(self.appends) {
            std::process::abort();
        }
        let out = self.replay.process(&entry)?;
        let every = self.replay.config.snapshot_every;
        if every > 0 && self.replay.events_applied.is_multiple_of(every) {
            self.log.append(&LogEntry::Snapshot {
                ts: entry.ts(),
                events_applied: self.replay.events_applied,
                digest: self.replay.state.digest(),
            })?;
        }
        self.save()?;
        Ok(out)
    }

    /// Runs the idle timer at `now`; logs the tick only when it produces an
    /// encouragement.
    pub fn tick(&mut self, now: Timestamp) -> Result<Option<Notification>, StoreError> {
        let mut probe = self.replay.state.clone();
        if probe.tick(now, &self.replay.config).is_none() {
            return Ok(None);
        }
        let entry = LogEntry::Tick { ts: now };
        self.log.append(&entry)?;
        let out = self.replay.process(&entry)?;
        self.save()?;
        Ok(out.into_iter().next())
    }

    /// Feeds one entry of a recorded log through the same path as live
    /// input. Ticks are logged unconditionally; snapshot lines are skipped
    /// because the store writes its own.
    pub fn submit_entry(&mut self, entry: &LogEntry) -> Result<Vec<Notification>, StoreError> {
        match entry {
            LogEntry::Event(e) => self.submit(e.clone()),
            LogEntry::Reset { ts } => self.reset(true, *ts).map(|()| Vec::new()),
            LogEntry::Snapshot { .. } => Ok(Vec::new()),
            LogEntry::Tick { .. } => {
                self.log.append(entry)?;
                let out = self.replay.process(entry)?;
                self.save()?;
                Ok(out)
            }
        }
    }

    pub fn reset(&mut self, confirm: bool, now: Timestamp) -> Result<(), StoreError> {
        if !confirm {
            return Err(EngineError::NotConfirmed.into());
        }
        let entry = LogEntry::Reset { ts: now };
        self.log.append(&entry)?;
        self.replay.process(&entry)?;
        self.save()
    }

    /// Writes `state.json` atomically (temp file and rename).
    pub fn save(&self) -> Result<(), StoreError> {
        let path = self.state_dir.join(STATE_FILE);
        let tmp = self.state_dir.join("state.json.tmp");
        let bytes = save_state(&self.replay.state, self.log.len(), self.replay.events_applied);
        std::fs::write(&tmp, bytes).map_err(|source| StoreError::Io { path: tmp.clone(), source })?;
        std::fs::rename(&tmp, &path).map_err(|source| StoreError::Io { path, source })
    }

    /// Flushes the log to disk and saves the checkpoint.
    pub fn close(self) -> Result<(), StoreError> {
        self.log.sync()?;
        self.save()
    }
}

/// Replaces the contents of a state directory with `entries`. The log is
/// replayed first; nothing is written if that fails.
pub fn import(options: &StoreOptions, entries: &[LogEntry]) -> Result<Replay, StoreError> {
    let (store, _) = Store::open(options)?;
    let replay = super::state::replay(entries, options.engine)?;
    let dir = &options.state_dir;
    let write = |name: &str, bytes: Vec<u8>| {
        let tmp = dir.join(format!("{name}.tmp"));
        let path = dir.join(name);
        std::fs::write(&tmp, bytes).map_err(|source| StoreError::Io { path: tmp.clone(), source })?;
        std::fs::rename(&tmp, &path).map_err(|source| StoreError::Io { path, source })
    };
    let mut log = String::new();
    for e in entries {
        log.push_str(&e.to_line());
        log.push('\n');
    }
    write(LOG_FILE, log.into_bytes())?;
    write(STATE_FILE, save_state(&replay.state, entries.len() as u64, replay.events_applied))?;
    drop(store);
    Ok(replay)
}

/// Entries of the log in `state_dir`, or none if there is no log yet.
pub fn read_store_log(state_dir: &Path) -> Result<Vec<LogEntry>, StoreError> {
    match super::log::read_log(&state_dir.join(LOG_FILE)) {
        Ok(e) => Ok(e),
        Err(LogError::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}
