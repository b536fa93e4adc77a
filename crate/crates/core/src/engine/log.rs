//! Newline-delimited JSON event log. Every line has the shape
//! `{"ts":…,"session":…,"kind":…,"payload":{…}}`; besides the event kinds
//! there are `reset`, `snapshot` and `tick` lines written by the daemon.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::events::{DevEvent, Timestamp};

/// Session name on lines written by the daemon itself.
const DAEMON_SESSION: &str = "questd";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LogEntry {
    Event(DevEvent),
    Reset {
        ts: Timestamp,
    },
    Snapshot {
        ts: Timestamp,
        events_applied: u64,
        digest: String,
    },
    /// An idle-timer tick that produced an encouragement.
    Tick {
        ts: Timestamp,
    },
}

#[derive(Serialize, Deserialize)]
struct SnapshotPayload {
    events_applied: u64,
    digest: String,
}

impl LogEntry {
    pub fn ts(&self) -> Timestamp {
        match self {
            LogEntry::Event(e) => e.ts,
            LogEntry::Reset { ts } | LogEntry::Snapshot { ts, .. } | LogEntry::Tick { ts } => *ts,
        }
    }

    pub fn to_line(&self) -> String {
        let (ts, kind, payload) = match self {
            LogEntry::Event(e) => return serde_json::to_string(e).expect("event serializes"),
            LogEntry::Reset { ts } => (ts, "reset", json!({})),
            LogEntry::Tick { ts } => (ts, "tick", json!({})),
            LogEntry::Snapshot { ts, events_applied, digest } => {
                (ts, "snapshot", json!({"events_applied": events_applied, "digest": digest}))
            }
        };
        format!(r#"{{"ts":{ts},"session":"{DAEMON_SESSION}","kind":"{kind}","payload":{payload}}}"#)
    }

    pub fn parse_line(line: &str) -> Result<LogEntry, String> {
        let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let ts = || v.get("ts").and_then(Value::as_i64).ok_or_else(|| "missing integer `ts`".to_string());
        match v.get("kind").and_then(Value::as_str) {
            Some("reset") => Ok(LogEntry::Reset { ts: ts()? }),
            Some("tick") => Ok(LogEntry::Tick { ts: ts()? }),
            Some("snapshot") => {
                let p: SnapshotPayload = serde_json::from_value(v.get("payload").cloned().unwrap_or(Value::Null))
                    .map_err(|e| e.to_string())?;
                Ok(LogEntry::Snapshot { ts: ts()?, events_applied: p.events_applied, digest: p.digest })
            }
            _ => serde_json::from_value(v).map(LogEntry::Event).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("event log {path}, line {line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.to_path_buf(), source }
}

/// Parses a complete log. Blank lines are skipped.
pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, LogError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_lines(path, BufReader::new(file))
}

fn parse_lines(path: &Path, reader: impl BufRead) -> Result<Vec<LogEntry>, LogError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = LogEntry::parse_line(&line).map_err(|reason| LogError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        })?;
        out.push(entry);
    }
    Ok(out)
}

/// Append-only writer. Each entry is written with a single `write_all` and
/// flushed before `append` returns.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    entries: u64,
}

impl EventLog {
    /// Opens (creating if needed) the log at `path` and returns the entries
    /// already in it. A trailing line without a newline is an interrupted
    /// write and is cut off.
    pub fn open(path: &Path) -> Result<(EventLog, Vec<LogEntry>), LogError> {
        let mut file = OpenOptions::new().read(true).create(true).append(true).open(path).map_err(io_err(path))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io_err(path))?;
        let complete = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        if complete < bytes.len() {
            file.set_len(complete as u64).map_err(io_err(path))?;
            file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
        }
        let entries = parse_lines(path, &bytes[..complete])?;
        let log = EventLog { path: path.to_path_buf(), file, entries: entries.len() as u64 };
        Ok((log, entries))
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<(), LogError> {
        let mut line = entry.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))?;
        self.entries += 1;
        Ok(())
    }

    /// Number of entries in the log, including those read at open.
    pub fn len(&self) -> u64 {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn sync(&self) -> Result<(), LogError> {
        self.file.sync_data().map_err(io_err(&self.path))
    }
}
