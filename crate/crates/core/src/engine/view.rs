//! The read model served by `GET /state` and `questd status --json`.

use serde::{Deserialize, Serialize};

use super::state::EngineState;
use crate::catalog::{
    catalog, display_progress, interval_fraction, level_for, next_target, next_target_text, AchievementId, Category,
    Level, Progress,
};
use crate::events::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievementView {
    pub id: AchievementId,
    pub title: String,
    pub category: Category,
    pub level: Level,
    /// Value shown on the progress bar.
    pub progress: u64,
    /// Per-level counters of multi-parameter achievements.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counters: Option<[u64; 4]>,
    pub unit: String,
    /// Fraction of the current level interval, 1.0 at platinum.
    pub fraction: f64,
    pub next_level: Option<Level>,
    pub next_threshold: Option<u64>,
    pub next_target_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub version: u32,
    pub digest: String,
    pub installed_at: Option<Timestamp>,
    pub last_event_ts: Option<Timestamp>,
    pub achievements: Vec<AchievementView>,
}

impl StateView {
    pub fn new(state: &EngineState) -> StateView {
        let achievements = catalog()
            .iter()
            .map(|def| {
                let p = state.progress(def.id);
                let next = next_target(def, &p);
                AchievementView {
                    id: def.id,
                    title: def.title.to_string(),
                    category: def.category,
                    level: level_for(def, &p),
                    progress: display_progress(def, &p),
                    counters: match p {
                        Progress::Counters(c) => Some(c),
                        Progress::Scalar(_) => None,
                    },
                    unit: def.unit.to_string(),
                    fraction: interval_fraction(def, &p),
                    next_level: next.map(|n| n.0),
                    next_threshold: next.map(|n| n.1),
                    next_target_text: next_target_text(def, &p),
                }
            })
            .collect();
        StateView {
            version: super::store::STATE_VERSION,
            digest: state.digest(),
            installed_at: state.installed_at,
            last_event_ts: state.last_event_ts,
            achievements,
        }
    }
}
