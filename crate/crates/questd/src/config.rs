//! `questd.toml` plus `QUESTD_*` environment overrides.
//!
//! An environment variable `QUESTD_FOO` sets the top-level key `foo`;
//! a double underscore descends into tables, so `QUESTD_REPORTS__JUNIT_GLOB`
//! sets `reports.junit_glob`. Values are read as TOML when they parse as
//! such, otherwise as plain strings.

use std::path::{Path, PathBuf};

use questd_core::engine::EngineConfig;
use questd_core::ingestion::IngestConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const ENV_PREFIX: &str = "QUESTD_";

/// Environment variables that are process switches rather than config keys.
const NOT_CONFIG: &[&str] = &["QUESTD_CRASH_AFTER_APPEND"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub state_dir: PathBuf,
    pub project_root: PathBuf,
    pub idle_minutes: u64,
    /// Forces the five-minute idle threshold.
    pub experiment_mode: bool,
    /// Set to false to run without the HTTP API. Port 0 picks a free port.
    pub api: bool,
    pub api_port: u16,
    /// Built dashboard assets; without it a placeholder page is served.
    pub static_dir: Option<PathBuf>,
    /// Idle-timer period of the daemon; 0 disables the timer.
    pub tick_seconds: u64,
    pub snapshot_every: u64,
    #[serde(flatten)]
    pub ingest: IngestConfig,
}

impl Default for Config {
    fn default() -> Self {
        let state_dir =
            std::env::var_os("HOME").map_or_else(|| PathBuf::from(".questd"), |h| Path::new(&h).join(".questd"));
        Config {
            state_dir,
            project_root: PathBuf::from("."),
            idle_minutes: 30,
            experiment_mode: false,
            api: true,
            api_port: 7878,
            static_dir: None,
            tick_seconds: 10,
            snapshot_every: EngineConfig::default().snapshot_every,
            ingest: IngestConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
}

impl Config {
    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            snapshot_every: self.snapshot_every,
            ..EngineConfig::with_idle(self.idle_minutes, self.experiment_mode)
        }
    }

    /// Reads the file (if any) and applies the environment on top.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Config, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.into(), source })?;
                text.parse::<Table>().map_err(|e| ConfigError::Parse(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for (key, value) in env {
            if let Some(rest) = key.strip_prefix(ENV_PREFIX) {
                if !NOT_CONFIG.contains(&key.as_str()) && !rest.is_empty() {
                    set_path(&mut table, &rest.to_ascii_lowercase(), env_value(&value));
                }
            }
        }
        let config: Config =
            Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(config)
    }
}

fn env_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) {
    match key.split_once("__") {
        Some((head, rest)) => {
            let entry = table.entry(head).or_insert_with(|| Value::Table(Table::new()));
            if !entry.is_table() {
                *entry = Value::Table(Table::new());
            }
            if let Value::Table(t) = entry {
                set_path(t, rest, value);
            }
        }
        None => {
            table.insert(key.to_string(), value);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn file_then_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("questd.toml");
        std::fs::write(
            &path,
            "state_dir = \"/tmp/s\"\nidle_minutes = 12\ndebounce_ms = 40\n[reports]\njunit_glob = [\"**/*.junit\"]\n",
        )
        .unwrap();
        let c = Config::load(
            Some(&path),
            env(&[
                ("QUESTD_IDLE_MINUTES", "7"),
                ("QUESTD_EXPERIMENT_MODE", "true"),
                ("QUESTD_STATIC_DIR", "web/dist"),
                ("QUESTD_REPORTS__COVERAGE_GLOB", "[\"**/cov.xml\"]"),
                ("QUESTD_CRASH_AFTER_APPEND", "3"),
                ("OTHER", "x"),
            ]),
        )
        .unwrap();
        assert_eq!(c.state_dir, PathBuf::from("/tmp/s"));
        assert_eq!(c.idle_minutes, 7);
        assert_eq!(c.static_dir, Some(PathBuf::from("web/dist")));
        assert_eq!(c.ingest.debounce_ms, 40);
        assert_eq!(c.ingest.reports.junit_glob, ["**/*.junit"]);
        assert_eq!(c.ingest.reports.coverage_glob, ["**/cov.xml"]);
        assert_eq!(c.engine().idle_ms, 5 * 60_000);
    }

    #[test]
    fn defaults_and_bad_values() {
        let c = Config::load(None, env(&[])).unwrap();
        assert_eq!((c.api_port, c.idle_minutes, c.api), (7878, 30, true));
        assert_eq!(c.engine().idle_ms, 30 * 60_000);
        assert!(Config::load(None, env(&[("QUESTD_API_PORT", "many")])).is_err());
    }
}
